#include "polykin/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>
#include <toml.hpp>

#include "oracles.hpp"

namespace polykin {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------- names

namespace {

const std::vector<std::pair<Experiment, std::string>>& name_table() {
    static const std::vector<std::pair<Experiment, std::string>> t{
        {Experiment::MassBalance, "mass_balance"},
        {Experiment::McVsPde, "mc_vs_pde"},
        {Experiment::Duality, "duality"},
        {Experiment::LongChain, "long_chain"},
        {Experiment::StationarySuite, "stationary_suite"},
        {Experiment::HolderSuite, "holder_suite"},
        {Experiment::AdjointCertificates, "adjoint_certificates"},
        {Experiment::SpecfunSuite, "specfun_suite"},
        {Experiment::DeviationScaling, "deviation_scaling"},
    };
    return t;
}

}  // namespace

const std::vector<Experiment>& all_experiments() {
    static const std::vector<Experiment> v = [] {
        std::vector<Experiment> out;
        for (const auto& [e, n] : name_table()) out.push_back(e);
        return out;
    }();
    return v;
}

std::string experiment_name(Experiment e) {
    for (const auto& [k, n] : name_table())
        if (k == e) return n;
    return "unknown";
}

Experiment parse_experiment(const std::string& s) {
    for (const auto& [k, n] : name_table())
        if (n == s) return k;
    throw ConfigError("experiment.name", "unknown experiment '" + s + "'");
}

// ---------------------------------------------------------------- config

namespace {

GridSpec reduced_strip(double x2_max, int n_x2, int n_theta) {
    GridSpec g;
    g.n_x1 = 4;
    g.x2_max = x2_max;
    g.n_x2 = n_x2;
    g.n_theta = n_theta;
    g.dt = g.dx2();
    return g;
}

GridSpec kinetic_reference() {
    GridSpec g;
    g.x1_min = -8.0;
    g.x1_max = 8.0;
    g.n_x1 = 128;
    g.x2_max = 8.0;
    g.n_x2 = 65;
    g.n_theta = 64;
    g.dt = 0.125;
    return g;
}

}  // namespace

RunConfig default_config(Experiment e) {
    RunConfig c;
    c.experiment = e;
    switch (e) {
        case Experiment::MassBalance:
            c.grid = kinetic_reference();
            c.horizon = 10.0;
            break;
        case Experiment::LongChain:
            c.grid = kinetic_reference();
            c.horizon = 24.0;
            c.window = 4.0;
            break;
        case Experiment::Duality:
            c.grid = reduced_strip(6.0, 25, 24);
            c.initial = {"gaussian", 1.0, -0.5, 0.3, 0.5};
            break;
        case Experiment::AdjointCertificates:
            c.grid = reduced_strip(4.0, 33, 32);
            c.grid.n_x1 = 16;
            c.adjoint.epsilon = 0.1;
            c.adjoint.kappa = 0.1;
            break;
        case Experiment::StationarySuite:
            c.grid = reduced_strip(4.0, 33, 32);
            c.initial = {"gaussian", 1.0, -0.5, 0.3, 0.5};
            break;
        case Experiment::HolderSuite:
            c.grid = reduced_strip(1.0, 401, 256);
            c.horizon = 1.0;
            c.initial = {"gaussian", 0.3, -0.5, 0.1, 0.3};
            break;
        case Experiment::SpecfunSuite:
            c.grid = reduced_strip(4.0, 33, 32);
            break;
        case Experiment::McVsPde:
            c.grid = reduced_strip(3.0, 241, 128);
            c.grid.dt = 0.5 * c.grid.dx2();
            c.horizon = 1.0;
            c.initial = {"gaussian", 1.0, -0.5, 0.3, 0.5};
            break;
        case Experiment::DeviationScaling:
            c.grid = reduced_strip(4.0, 33, 32);
            c.horizon = 1.0;
            break;
    }
    return c;
}

void RunConfig::validate() const {
    auto need = [](bool ok, const char* field, const std::string& msg) {
        if (!ok) throw ConfigError(field, msg);
    };
    try {
        grid.validate();
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        if (msg.rfind("grid: ", 0) == 0) msg.erase(0, 6);
        throw ConfigError("grid", msg);
    }
    const bool kinetic = experiment == Experiment::MassBalance || experiment == Experiment::LongChain;
    const double cfl = kinetic ? std::min(grid.dx1(), grid.dx2()) : grid.dx2();
    need(grid.dt <= cfl * (1.0 + 1e-12), "grid.dt", "exceeds the transport bound " + std::to_string(cfl));
    need(threads >= 1, "experiment.threads", "must be >= 1");
    need(horizon > 0.0, "experiment.horizon", "must be > 0");
    need(window > 0.0 && (experiment != Experiment::LongChain || window < horizon), "experiment.window",
         "must lie in (0, horizon)");
    need(initial.kind == "point" || initial.kind == "gaussian", "experiment.initial_kind", "must be point or gaussian");
    need(initial.x2 >= 0.0 && initial.x2 <= grid.x2_max, "experiment.initial_x2", "must lie in [0, grid.x2_max]");
    need(std::isfinite(initial.theta), "experiment.initial_theta", "must be finite");
    need(initial.sigma_x2 >= 0.0, "experiment.initial_sigma_x2", "must be >= 0");
    need(initial.sigma_theta >= 0.0, "experiment.initial_sigma_theta", "must be >= 0");

    need(chain.epsilon > 0.0 && chain.epsilon <= 0.1, "chain.epsilon", "must lie in (0, 0.1]");
    need(chain.length > 0.0, "chain.length", "must be > 0");
    need(chain.n_chains >= 1, "chain.n_chains", "must be >= 1");
    need(chain.band_c_x2 > 0.0, "chain.band_c_x2", "must be > 0");
    need(chain.band_c_theta > 0.0, "chain.band_c_theta", "must be > 0");
    need(chain.bin_x2 > 0.0, "chain.bin_x2", "must be > 0");
    need(chain.bin_theta >= 1 && grid.n_theta % chain.bin_theta == 0, "chain.bin_theta",
         "must divide grid.n_theta");
    need(chain.sweep.size() >= 2, "chain.sweep", "needs at least two epsilons");
    for (double e : chain.sweep) need(e > 0.0 && e <= 0.1, "chain.sweep", "entries must lie in (0, 0.1]");
    need(chain.sweep_chains >= 1, "chain.sweep_chains", "must be >= 1");
    need(chain.sweep_start_x2 >= 0.0, "chain.sweep_start_x2", "must be >= 0");

    need(adjoint.epsilon > 0.0 && adjoint.epsilon <= 1.0, "adjoint.epsilon", "must lie in (0, 1]");
    need(adjoint.kappa > 0.0 && adjoint.kappa < kPi / 4, "adjoint.kappa", "must lie in (0, pi/4)");
    need(adjoint.lambda > 0.0, "adjoint.lambda", "must be > 0");
    need(adjoint.level >= 0 && adjoint.level <= 4, "adjoint.level", "must lie in [0, 4]");
    need(adjoint.dt_ratio > 0.0 && adjoint.dt_ratio <= 1.0, "adjoint.dt_ratio", "must lie in (0, 1]");
    need(!adjoint.times.empty() && std::is_sorted(adjoint.times.begin(), adjoint.times.end()) &&
             adjoint.times.front() >= 0.0,
         "adjoint.times", "must be non-empty, ascending and >= 0");
    need(adjoint.n_random >= 1, "adjoint.n_random", "must be >= 1");
    need(adjoint.horizon > 0.0, "adjoint.horizon", "must be > 0");

    try {
        profiles.holder.validate();
        HolderParams h = profiles.holder;
        h.alpha = profiles.alpha_holder;
        h.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("profiles.alpha", e.what());
    }
    try {
        profiles.super.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("profiles.lambda", e.what());
    }
    need(profiles.eps_c >= 0.0, "profiles.eps_c", "must be >= 0");
    need(profiles.stationary_epsilon > 0.0 && profiles.stationary_epsilon <= 1.0, "profiles.stationary_epsilon",
         "must lie in (0, 1]");
    need(profiles.stationary_tol > 0.0, "profiles.stationary_tol", "must be > 0");
}

namespace {

double num(const toml::node& n, const std::string& field) {
    if (auto v = n.value<double>()) return *v;
    throw ConfigError(field, "expected a number");
}

long integer(const toml::node& n, const std::string& field) {
    if (auto v = n.value<int64_t>()) return static_cast<long>(*v);
    throw ConfigError(field, "expected an integer");
}

bool boolean(const toml::node& n, const std::string& field) {
    if (auto v = n.value<bool>()) return *v;
    throw ConfigError(field, "expected true or false");
}

std::string text(const toml::node& n, const std::string& field) {
    if (auto v = n.value<std::string>()) return *v;
    throw ConfigError(field, "expected a string");
}

std::vector<double> numbers(const toml::node& n, const std::string& field) {
    const auto* arr = n.as_array();
    if (!arr) throw ConfigError(field, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : *arr) out.push_back(num(x, field));
    return out;
}

using Setter = std::function<void(RunConfig&, const toml::node&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
    static const std::map<std::string, std::map<std::string, Setter>> s{
        {"experiment",
         {
             {"name", [](RunConfig&, const toml::node&, const std::string&) {}},  // handled first
             {"seed", [](RunConfig& c, const toml::node& n, const std::string& f) {
                  const long v = integer(n, f);
                  if (v < 0) throw ConfigError(f, "must be >= 0");
                  c.seed = static_cast<std::uint64_t>(v);
              }},
             {"output_dir", [](RunConfig& c, const toml::node& n, const std::string& f) { c.output_dir = text(n, f); }},
             {"threads", [](RunConfig& c, const toml::node& n, const std::string& f) { c.threads = static_cast<int>(integer(n, f)); }},
             {"horizon", [](RunConfig& c, const toml::node& n, const std::string& f) { c.horizon = num(n, f); }},
             {"window", [](RunConfig& c, const toml::node& n, const std::string& f) { c.window = num(n, f); }},
             {"initial_kind", [](RunConfig& c, const toml::node& n, const std::string& f) { c.initial.kind = text(n, f); }},
             {"initial_x2", [](RunConfig& c, const toml::node& n, const std::string& f) { c.initial.x2 = num(n, f); }},
             {"initial_theta", [](RunConfig& c, const toml::node& n, const std::string& f) { c.initial.theta = num(n, f); }},
             {"initial_sigma_x2", [](RunConfig& c, const toml::node& n, const std::string& f) { c.initial.sigma_x2 = num(n, f); }},
             {"initial_sigma_theta", [](RunConfig& c, const toml::node& n, const std::string& f) { c.initial.sigma_theta = num(n, f); }},
         }},
        {"grid",
         {
             {"x1_min", [](RunConfig& c, const toml::node& n, const std::string& f) { c.grid.x1_min = num(n, f); }},
             {"x1_max", [](RunConfig& c, const toml::node& n, const std::string& f) { c.grid.x1_max = num(n, f); }},
             {"n_x1", [](RunConfig& c, const toml::node& n, const std::string& f) { c.grid.n_x1 = static_cast<int>(integer(n, f)); }},
             {"x2_max", [](RunConfig& c, const toml::node& n, const std::string& f) { c.grid.x2_max = num(n, f); }},
             {"n_x2", [](RunConfig& c, const toml::node& n, const std::string& f) { c.grid.n_x2 = static_cast<int>(integer(n, f)); }},
             {"n_theta", [](RunConfig& c, const toml::node& n, const std::string& f) { c.grid.n_theta = static_cast<int>(integer(n, f)); }},
             {"dt", [](RunConfig& c, const toml::node& n, const std::string& f) { c.grid.dt = num(n, f); }},
             {"D", [](RunConfig& c, const toml::node& n, const std::string& f) { c.grid.D = num(n, f); }},
             {"periodic_x1", [](RunConfig& c, const toml::node& n, const std::string& f) { c.grid.periodic_x1 = boolean(n, f); }},
         }},
        {"chain",
         {
             {"epsilon", [](RunConfig& c, const toml::node& n, const std::string& f) { c.chain.epsilon = num(n, f); }},
             {"length", [](RunConfig& c, const toml::node& n, const std::string& f) { c.chain.length = num(n, f); }},
             {"n_chains", [](RunConfig& c, const toml::node& n, const std::string& f) { c.chain.n_chains = integer(n, f); }},
             {"band_c_x2", [](RunConfig& c, const toml::node& n, const std::string& f) { c.chain.band_c_x2 = num(n, f); }},
             {"band_c_theta", [](RunConfig& c, const toml::node& n, const std::string& f) { c.chain.band_c_theta = num(n, f); }},
             {"by_contact", [](RunConfig& c, const toml::node& n, const std::string& f) { c.chain.by_contact = boolean(n, f); }},
             {"bin_x2", [](RunConfig& c, const toml::node& n, const std::string& f) { c.chain.bin_x2 = num(n, f); }},
             {"bin_theta", [](RunConfig& c, const toml::node& n, const std::string& f) { c.chain.bin_theta = static_cast<int>(integer(n, f)); }},
             {"trend", [](RunConfig& c, const toml::node& n, const std::string& f) { c.chain.trend = boolean(n, f); }},
             {"sweep", [](RunConfig& c, const toml::node& n, const std::string& f) { c.chain.sweep = numbers(n, f); }},
             {"sweep_chains", [](RunConfig& c, const toml::node& n, const std::string& f) { c.chain.sweep_chains = integer(n, f); }},
             {"sweep_start_x2", [](RunConfig& c, const toml::node& n, const std::string& f) { c.chain.sweep_start_x2 = num(n, f); }},
         }},
        {"adjoint",
         {
             {"epsilon", [](RunConfig& c, const toml::node& n, const std::string& f) { c.adjoint.epsilon = num(n, f); }},
             {"kappa", [](RunConfig& c, const toml::node& n, const std::string& f) { c.adjoint.kappa = num(n, f); }},
             {"lambda", [](RunConfig& c, const toml::node& n, const std::string& f) { c.adjoint.lambda = num(n, f); }},
             {"level", [](RunConfig& c, const toml::node& n, const std::string& f) { c.adjoint.level = static_cast<int>(integer(n, f)); }},
             {"dt_ratio", [](RunConfig& c, const toml::node& n, const std::string& f) { c.adjoint.dt_ratio = num(n, f); }},
             {"times", [](RunConfig& c, const toml::node& n, const std::string& f) { c.adjoint.times = numbers(n, f); }},
             {"n_random", [](RunConfig& c, const toml::node& n, const std::string& f) { c.adjoint.n_random = static_cast<int>(integer(n, f)); }},
             {"horizon", [](RunConfig& c, const toml::node& n, const std::string& f) { c.adjoint.horizon = num(n, f); }},
         }},
        {"profiles",
         {
             {"alpha", [](RunConfig& c, const toml::node& n, const std::string& f) { c.profiles.holder.alpha = num(n, f); }},
             {"alpha_sing", [](RunConfig& c, const toml::node& n, const std::string& f) { c.profiles.holder.alpha_sing = num(n, f); }},
             {"alpha_holder", [](RunConfig& c, const toml::node& n, const std::string& f) { c.profiles.alpha_holder = num(n, f); }},
             {"eps_c", [](RunConfig& c, const toml::node& n, const std::string& f) { c.profiles.eps_c = num(n, f); }},
             {"lambda", [](RunConfig& c, const toml::node& n, const std::string& f) { c.profiles.super.lambda = num(n, f); }},
             {"eta", [](RunConfig& c, const toml::node& n, const std::string& f) { c.profiles.super.eta = num(n, f); }},
             {"delta", [](RunConfig& c, const toml::node& n, const std::string& f) { c.profiles.super.delta = num(n, f); }},
             {"R", [](RunConfig& c, const toml::node& n, const std::string& f) { c.profiles.super.R = num(n, f); }},
             {"stationary_epsilon", [](RunConfig& c, const toml::node& n, const std::string& f) { c.profiles.stationary_epsilon = num(n, f); }},
             {"stationary_tol", [](RunConfig& c, const toml::node& n, const std::string& f) { c.profiles.stationary_tol = num(n, f); }},
         }},
    };
    return s;
}

}  // namespace

RunConfig parse_config(const std::string& toml_text, const std::string& origin) {
    toml::table tbl;
    try {
        tbl = toml::parse(toml_text, origin);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << e.description() << " (line " << e.source().begin.line << ")";
        throw ConfigError(origin, msg.str());
    }
    const auto* exp = tbl["experiment"].as_table();
    if (!exp || !(*exp)["name"]) throw ConfigError("experiment.name", "missing");
    RunConfig c = default_config(parse_experiment(text(*(*exp)["name"].node(), "experiment.name")));
    for (const auto& [section, node] : tbl) {
        const std::string sec(section.str());
        auto it = setters().find(sec);
        if (it == setters().end()) throw ConfigError(sec, "unknown section");
        const auto* t = node.as_table();
        if (!t) throw ConfigError(sec, "expected a table");
        for (const auto& [key, value] : *t) {
            const std::string k(key.str()), field = sec + "." + k;
            auto s = it->second.find(k);
            if (s == it->second.end()) throw ConfigError(field, "unknown key");
            s->second(c, value, field);
        }
    }
    c.source_text = toml_text;
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

// ---------------------------------------------------------------- reports

const Metric& ExperimentReport::metric(const std::string& name) const {
    for (const auto& m : metrics)
        if (m.name == name) return m;
    throw std::out_of_range("no metric " + name);
}

double ExperimentReport::value(const std::string& name) const {
    for (const auto& m : metrics)
        if (m.name == name) return m.value;
    auto it = info.find(name);
    if (it != info.end()) return it->second;
    throw std::out_of_range("no value " + name);
}

std::string content_hash(const std::string& content) {
    const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return out.str();
}

namespace {

json config_json(const RunConfig& c) {
    const GridSpec& g = c.grid;
    return json{
        {"experiment",
         {{"name", experiment_name(c.experiment)},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"threads", c.threads},
          {"horizon", c.horizon},
          {"window", c.window},
          {"initial_kind", c.initial.kind},
          {"initial_x2", c.initial.x2},
          {"initial_theta", c.initial.theta},
          {"initial_sigma_x2", c.initial.sigma_x2},
          {"initial_sigma_theta", c.initial.sigma_theta}}},
        {"grid",
         {{"x1_min", g.x1_min},
          {"x1_max", g.x1_max},
          {"n_x1", g.n_x1},
          {"x2_max", g.x2_max},
          {"n_x2", g.n_x2},
          {"n_theta", g.n_theta},
          {"dt", g.dt},
          {"D", g.D},
          {"periodic_x1", g.periodic_x1}}},
        {"chain",
         {{"epsilon", c.chain.epsilon},
          {"length", c.chain.length},
          {"n_chains", c.chain.n_chains},
          {"band_c_x2", c.chain.band_c_x2},
          {"band_c_theta", c.chain.band_c_theta},
          {"by_contact", c.chain.by_contact},
          {"bin_x2", c.chain.bin_x2},
          {"bin_theta", c.chain.bin_theta},
          {"trend", c.chain.trend},
          {"sweep", c.chain.sweep},
          {"sweep_chains", c.chain.sweep_chains},
          {"sweep_start_x2", c.chain.sweep_start_x2}}},
        {"adjoint",
         {{"epsilon", c.adjoint.epsilon},
          {"kappa", c.adjoint.kappa},
          {"lambda", c.adjoint.lambda},
          {"level", c.adjoint.level},
          {"dt_ratio", c.adjoint.dt_ratio},
          {"times", c.adjoint.times},
          {"n_random", c.adjoint.n_random},
          {"horizon", c.adjoint.horizon}}},
        {"profiles",
         {{"alpha", c.profiles.holder.alpha},
          {"alpha_sing", c.profiles.holder.alpha_sing},
          {"alpha_holder", c.profiles.alpha_holder},
          {"eps_c", c.profiles.eps_c},
          {"lambda", c.profiles.super.lambda},
          {"eta", c.profiles.super.eta},
          {"delta", c.profiles.super.delta},
          {"R", c.profiles.super.R},
          {"stationary_epsilon", c.profiles.stationary_epsilon},
          {"stationary_tol", c.profiles.stationary_tol}}},
    };
}

bool holds(double v, const std::string& rel, double thr) {
    if (!std::isfinite(v)) return false;
    if (rel == "<=") return v <= thr;
    if (rel == "<") return v < thr;
    if (rel == ">=") return v >= thr;
    if (rel == ">") return v > thr;
    return false;
}

void add(ExperimentReport& r, const std::string& name, double value, const std::string& rel, double thr,
         const std::string& label, bool gate = true) {
    Metric m;
    m.name = name;
    m.value = value;
    m.relation = rel;
    m.threshold = thr;
    m.label = label;
    m.gate = gate;
    m.pass = holds(value, rel, thr);
    r.metrics.push_back(m);
}

void finish(ExperimentReport& r) {
    r.pass = std::all_of(r.metrics.begin(), r.metrics.end(), [](const Metric& m) { return !m.gate || m.pass; });
}

// Output directory for an experiment, or empty when artifacts are off.
std::string out_dir(const RunConfig& c) {
    if (c.output_dir.empty()) return {};
    fs::path p = fs::path(c.output_dir) / experiment_name(c.experiment);
    fs::create_directories(p);
    return p.string();
}

class Csv {
public:
    Csv(const std::string& dir, const std::string& name, const std::string& header, ExperimentReport& r) {
        if (dir.empty()) return;
        path_ = (fs::path(dir) / name).string();
        out_.open(path_);
        if (!out_) throw std::runtime_error("cannot write " + path_);
        out_.precision(12);
        out_ << header << '\n';
        r.artifacts.push_back(path_);
    }
    template <class... T>
    void row(const T&... v) {
        if (!out_.is_open()) return;
        int i = 0;
        ((out_ << (i++ ? "," : "") << v), ...);
        out_ << '\n';
    }

private:
    std::string path_;
    std::ofstream out_;
};

InitialCondition make_ic(const InitialSection& s) {
    InitialCondition ic;
    ic.kind = s.kind == "gaussian" ? InitialCondition::Kind::Gaussian : InitialCondition::Kind::PointMass;
    ic.center = {0.0, s.x2, wrap_angle(s.theta)};
    ic.sigma_x2 = s.sigma_x2;
    ic.sigma_theta = s.sigma_theta;
    return ic;
}

// reduced runs carry no x1 structure, so the x1 profile is flat
InitialCondition make_reduced_ic(const InitialSection& s) {
    InitialCondition ic = make_ic(s);
    ic.sigma_x1 = 1e3;
    return ic;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string report_json(const ExperimentReport& r, const RunConfig& cfg) {
    json j;
    j["experiment"] = r.experiment;
    j["pass"] = r.pass;
    j["input_hash"] = r.input_hash;
    j["config"] = config_json(cfg);
    j["metrics"] = json::array();
    for (const auto& m : r.metrics)
        j["metrics"].push_back({{"name", m.name},
                                {"value", std::isfinite(m.value) ? json(m.value) : json(nullptr)},
                                {"relation", m.relation},
                                {"threshold", m.threshold},
                                {"label", m.label},
                                {"gate", m.gate},
                                {"pass", m.pass}});
    j["info"] = json::object();
    for (const auto& [k, v] : r.info) j["info"][k] = std::isfinite(v) ? json(v) : json(nullptr);
    j["notes"] = r.notes;
    j["artifacts"] = r.artifacts;
    return j.dump(2);
}

// ---------------------------------------------------------------- mass balance / long chain

namespace {

struct KineticRun {
    std::vector<double> t, interior, plus, minus, escaped, total;
    int interior_increases = 0;
    double max_drift = 0.0;
    double max_step_drift = 0.0;
    BoundaryDensityPair rho_t1, rho_t2;
};

KineticRun run_kinetic(const RunConfig& c, double t1, ExperimentReport& r, const std::string& dir) {
    const GridSpec& g = c.grid;
    KineticState s = init_state(make_ic(c.initial), g);
    KineticRun k;
    Csv csv(dir, "mass_series.csv", "t,interior,trapped_plus,trapped_minus,escaped,total", r);
    auto record = [&] {
        const MassLedger& l = s.ledger;
        k.t.push_back(s.time);
        k.interior.push_back(l.interior);
        k.plus.push_back(l.trapped_plus);
        k.minus.push_back(l.trapped_minus);
        k.escaped.push_back(l.escaped_top);
        k.total.push_back(l.total);
        k.max_drift = std::max(k.max_drift, std::abs(l.total - 1.0));
        csv.row(s.time, l.interior, l.trapped_plus, l.trapped_minus, l.escaped_top, l.total);
    };
    record();
    const long steps = std::lround(c.horizon / g.dt);
    const long step_t1 = std::lround(t1 / g.dt);
    for (long n = 1; n <= steps; ++n) {
        const double before = s.ledger.total, interior_before = s.ledger.interior;
        s = advance(s, g.dt);
        k.max_step_drift = std::max(k.max_step_drift, std::abs(s.ledger.total - before));
        if (s.ledger.interior > interior_before + 1e-14) ++k.interior_increases;
        record();
        if (n == step_t1) k.rho_t1 = s.boundary;
    }
    k.rho_t2 = s.boundary;
    return k;
}

// L1 distance between rho(t2, .) and rho(t1, . - shift), periodic wrap or zero outside.
double translation_defect(const std::vector<double>& late, const std::vector<double>& early, double shift,
                          const GridSpec& g) {
    const int n = g.n_x1;
    const double dx = g.dx1();
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
        const double q = i - shift / dx;
        const double fl = std::floor(q);
        const double w = q - fl;
        auto val = [&](long j) {
            if (g.periodic_x1) return early[((j % n) + n) % n];
            return (j < 0 || j >= n) ? 0.0 : early[j];
        };
        const double shifted = (1.0 - w) * val(static_cast<long>(fl)) + w * val(static_cast<long>(fl) + 1);
        d += std::abs(late[i] - shifted) * dx;
    }
    return d;
}

}  // namespace

ExperimentReport mass_balance(const RunConfig& c) {
    ExperimentReport r;
    r.experiment = experiment_name(Experiment::MassBalance);
    const std::string dir = out_dir(c);
    const KineticRun k = run_kinetic(c, c.horizon, r, dir);
    add(r, "max_mass_drift", k.max_drift, "<=", 1e-6, "theory");
    r.info["max_step_drift"] = k.max_step_drift;
    r.info["final_interior"] = k.interior.back();
    r.info["final_trapped_plus"] = k.plus.back();
    r.info["final_trapped_minus"] = k.minus.back();
    r.info["final_escaped"] = k.escaped.back();
    r.info["interior_increases"] = k.interior_increases;
    finish(r);
    return r;
}

ExperimentReport long_chain_report(const RunConfig& c) {
    ExperimentReport r;
    r.experiment = experiment_name(Experiment::LongChain);
    const std::string dir = out_dir(c);
    const double t1 = c.horizon - c.window;
    const KineticRun k = run_kinetic(c, t1, r, dir);
    const GridSpec& g = c.grid;
    add(r, "interior_increases", k.interior_increases, "<=", 0, "theory");
    add(r, "final_interior_fraction", k.interior.back() / k.interior.front(), "<", 0.1, "calibrated");
    const double dp = translation_defect(k.rho_t2.rho_plus, k.rho_t1.rho_plus, c.window, g);
    const double dm = translation_defect(k.rho_t2.rho_minus, k.rho_t1.rho_minus, -c.window, g);
    add(r, "translation_defect_plus", dp, "<=", 0.05, "theory");
    add(r, "translation_defect_minus", dm, "<=", 0.05, "theory", false);
    add(r, "max_mass_drift", k.max_drift, "<=", 1e-6, "theory");
    r.info["final_escaped"] = k.escaped.back();
    r.info["t1"] = t1;
    r.info["t2"] = c.horizon;
    r.info["trapped_gain_in_window"] =
        (k.plus.back() + k.minus.back()) - (k.plus[std::lround(t1 / g.dt)] + k.minus[std::lround(t1 / g.dt)]);
    Csv rho(dir, "rho_late.csv", "x1,rho_plus_t1,rho_plus_t2,rho_minus_t1,rho_minus_t2", r);
    for (int i = 0; i < g.n_x1; ++i)
        rho.row(g.x1(i), k.rho_t1.rho_plus[i], k.rho_t2.rho_plus[i], k.rho_t1.rho_minus[i], k.rho_t2.rho_minus[i]);
    r.notes.push_back("interior fraction excludes mass escaped through x2_max; see final_escaped");
    finish(r);
    return r;
}

// ---------------------------------------------------------------- duality

namespace {

double duality_level(const RunConfig& c, int level, std::vector<double>* per_time) {
    const int m = 1 << level;
    GridSpec g = c.grid;
    g.n_x2 = (c.grid.n_x2 - 1) * m + 1;
    g.n_theta = c.grid.n_theta * m;
    g.dt = c.adjoint.dt_ratio * g.dx2();
    const double kap = c.adjoint.kappa / m;
    AdjointParams p;
    p.epsilon = c.adjoint.epsilon / m;
    p.kappa = kap;
    ReducedState f = init_reduced(make_reduced_ic(c.initial), g);
    std::vector<ReducedState> fw;
    for (double t : c.adjoint.times) {
        while (f.time < t - 1e-12) f = advance_reduced(f, std::min(g.dt, t - f.time));
        fw.push_back(f);
    }
    // test data: wall-compatible near x2 = 0, smooth away from it
    auto q = [&](double th) { return th <= 0.0 ? chi_kappa(th, kap) : 0.5 * (1.0 + std::cos(th)); };
    auto gfun = [&](double x2, double th) {
        const double e = std::exp(-x2 / 2);
        return e * q(th) + (1.0 - e) * (0.5 + 0.2 * std::sin(th));
    };
    auto adj = solve_adjoint_reduced(g, gfun, p, c.adjoint.times);
    if (per_time) {
        per_time->clear();
        for (std::size_t i = 0; i < fw.size(); ++i)
            per_time->push_back(duality_check({fw[0], fw[i]}, {adj[0], adj[i]}));
    }
    return duality_check(fw, adj);
}

}  // namespace

ExperimentReport duality_experiment(const RunConfig& c) {
    ExperimentReport r;
    r.experiment = experiment_name(Experiment::Duality);
    const std::string dir = out_dir(c);
    std::vector<double> ref_t, fine_t;
    const double ref = duality_level(c, c.adjoint.level, &ref_t);
    const double fine = duality_level(c, c.adjoint.level + 1, &fine_t);
    add(r, "defect_reference", ref, "<=", 0.01, "theory");
    add(r, "refinement_factor", ref / fine, ">=", 1.8, "calibrated");
    r.info["defect_refined"] = fine;
    Csv csv(dir, "duality.csv", "t,defect_reference,defect_refined", r);
    for (std::size_t i = 0; i < ref_t.size(); ++i) csv.row(c.adjoint.times[i], ref_t[i], fine_t[i]);
    finish(r);
    return r;
}

// ---------------------------------------------------------------- adjoint certificates

namespace {

struct RandomModes {
    double a[4][3];  // cos, sin amplitude, x2 decay
    double c1 = 0.0, phase = 0.0;
    int q = 1;
    double period = 1.0;

    double base(double x2, double th) const {
        double s = 0.0;
        for (int m = 0; m < 4; ++m)
            s += (a[m][0] * std::cos(m * th) + a[m][1] * std::sin(m * th)) * std::exp(-a[m][2] * x2);
        return s;
    }
    double x1_factor(double x1) const { return 1.0 + c1 * std::cos(2 * kPi * q * x1 / period + phase); }
    double x1_slope(double x1) const { return -c1 * (2 * kPi * q / period) * std::sin(2 * kPi * q * x1 / period + phase); }
};

RandomModes random_modes(std::mt19937_64& rng, double period) {
    std::uniform_real_distribution<double> u(-1.0, 1.0), r(0.1, 1.5), c(0.0, 0.5), ph(0.0, 2 * kPi);
    RandomModes f;
    for (auto& row : f.a) {
        row[0] = u(rng);
        row[1] = u(rng);
        row[2] = r(rng);
    }
    f.c1 = c(rng);
    f.phase = ph(rng);
    f.q = 1 + static_cast<int>(rng() % 2);
    f.period = period;
    return f;
}

}  // namespace

ExperimentReport adjoint_certificates(const RunConfig& c) {
    ExperimentReport r;
    r.experiment = experiment_name(Experiment::AdjointCertificates);
    const std::string dir = out_dir(c);
    Csv csv(dir, "certificates.csv", "solver,trial,sup_psi,bound", r);
    std::mt19937_64 rng(c.seed);
    AdjointParams p;
    p.epsilon = c.adjoint.epsilon;
    p.kappa = c.adjoint.kappa;

    GridSpec red = c.grid;
    int red_viol = 0;
    double red_margin = INFINITY;
    for (int trial = 0; trial < c.adjoint.n_random; ++trial) {
        const RandomModes f = random_modes(rng, 1.0);
        auto g = [&](double x2, double th) { return f.base(x2, th); };
        const std::vector<double> init = sample_reduced(red, g);
        double gs = 0.0;
        for (double v : init) gs = std::max(gs, std::abs(v));
        ReducedAdjointSolver s(red, p, init);
        double sup = 0.0;
        while (s.time() < c.adjoint.horizon - 1e-12) {
            s.step();
            sup = std::max(sup, s.field().sup());
        }
        const double bound = 2 * gs + 1e-8;
        if (sup > bound) ++red_viol;
        red_margin = std::min(red_margin, bound - sup);
        csv.row("reduced", trial, sup, bound);
    }

    // the full solver evaluates its wall integral per node and step, so it runs a shorter horizon
    GridSpec full = c.grid;
    const double full_horizon = std::min(1.0, c.adjoint.horizon);
    int full_viol = 0;
    double full_margin = INFINITY;
    const double period = full.x1_max - full.x1_min;
    for (int trial = 0; trial < c.adjoint.n_random; ++trial) {
        const RandomModes f = random_modes(rng, period);
        SmoothData d;
        d.value = [f](double x1, double x2, double th) { return f.base(x2, th) * f.x1_factor(x1); };
        d.d_x1 = [f](double x1, double x2, double th) { return f.base(x2, th) * f.x1_slope(x1); };
        // sup norms on a sample four times finer than the grid in every direction
        double gs = 0.0, ds = 0.0;
        for (int i = 0; i < 4 * full.n_x1; ++i) {
            const double x1 = full.x1_min + (i + 0.5) * full.dx1() / 4;
            for (int j = 0; j < 4 * full.n_x2; ++j) {
                const double x2 = j * full.dx2() / 4;
                for (int k = 0; k < 4 * full.n_theta; ++k) {
                    const double th = -kPi + k * full.dtheta() / 4;
                    gs = std::max(gs, std::abs(d.value(x1, x2, th)));
                    ds = std::max(ds, std::abs(d.d_x1(x1, x2, th)));
                }
            }
        }
        FullAdjointSolver s(full, p, d);
        double sup = s.field().sup();
        while (s.time() < full_horizon - 1e-12) {
            s.step();
            sup = std::max(sup, s.field().sup());
        }
        const double bound = 3 * gs + 2 * p.kappa * ds + 1e-8;
        if (sup > bound) ++full_viol;
        full_margin = std::min(full_margin, bound - sup);
        csv.row("full", trial, sup, bound);
    }
    add(r, "reduced_violations", red_viol, "<=", 0, "theory");
    add(r, "full_violations", full_viol, "<=", 0, "theory");
    r.info["reduced_min_margin"] = red_margin;
    r.info["full_min_margin"] = full_margin;
    r.info["full_horizon"] = full_horizon;

    const RandomModes f = random_modes(rng, 1.0);
    const std::vector<double> init = sample_reduced(red, [&](double x2, double th) { return f.base(x2, th); });
    const ResolventResult res = resolvent(red, p, init, c.adjoint.lambda);
    double gs = 0.0;
    for (double v : init) gs = std::max(gs, std::abs(v));
    add(r, "resolvent_residual", res.residual / gs, "<=", 1e-8, "calibrated");
    const double gmin = *std::min_element(init.begin(), init.end());
    const double umin = *std::min_element(res.u.values.begin(), res.u.values.end());
    add(r, "resolvent_min_excess", gmin - umin, "<=", 1e-8, "theory", false);
    r.info["resolvent_horizon"] = res.horizon;
    finish(r);
    return r;
}

// ---------------------------------------------------------------- stationary

ExperimentReport stationary_suite(const RunConfig& c) {
    ExperimentReport r;
    r.experiment = experiment_name(Experiment::StationarySuite);
    const std::string dir = out_dir(c);
    const double tol = c.profiles.stationary_tol;
    auto problem = [&](BoundaryKind kind, double initial = 0.0) {
        StationaryProblem p;
        p.kind = kind;
        p.grid = c.grid;
        p.epsilon = c.profiles.stationary_epsilon;
        p.initial = initial;
        return p;
    };
    const auto plus = solve_stationary(problem(BoundaryKind::Plus), tol);
    const auto minus = solve_stationary(problem(BoundaryKind::Minus), tol);
    const auto plus_from_one = solve_stationary(problem(BoundaryKind::Plus, 1.0), tol);
    const auto zero = solve_stationary(problem(BoundaryKind::Zero, 1.0), tol);

    int out_of_range = 0;
    for (const auto* s : {&plus, &minus})
        for (double v : s->psi.values)
            if (v < -1e-12 || v > 1.0 + 1e-12) ++out_of_range;
    double gap = 0.0, zmax = 0.0;
    for (std::size_t i = 0; i < plus.psi.values.size(); ++i) {
        gap = std::max(gap, std::abs(plus.psi.values[i] - plus_from_one.psi.values[i]));
        zmax = std::max(zmax, std::abs(zero.psi.values[i]));
    }
    // far field with a reflecting top, so the value at L is not imposed
    auto far = [&](double L) {
        StationaryProblem p = problem(BoundaryKind::Plus);
        p.grid.x2_max = L;
        p.grid.n_x2 = static_cast<int>(std::lround(L / c.grid.dx2())) + 1;
        p.top = TopClosure::Clamp;
        return farfield_limit(solve_stationary(p, tol).psi);
    };
    const double L = c.grid.x2_max;
    const double far_q = far(L / 4), far_h = far(L / 2), far_L = far(L);

    add(r, "bound_violations", out_of_range, "<=", 0, "theory");
    add(r, "symmetry_defect", check_symmetry(plus.psi), "<=", 0.02, "theory");
    add(r, "farfield_defect", std::max(far_L, farfield_limit(plus.psi)), "<=", 0.02, "theory");
    add(r, "zero_boundary_max", zmax, "<=", 0.02, "theory");
    add(r, "uniqueness_gap", gap, "<=", 2 * tol, "theory");
    add(r, "steady_residual", std::max(plus.residual, minus.residual), "<=", 10 * tol, "calibrated");
    add(r, "farfield_trend", (far_q > far_h && far_h >= far_L) ? 1.0 : 0.0, ">=", 1.0, "calibrated", false);
    add(r, "supersolution_violation", supersolution_domination(zero.psi, c.profiles.super).max_violation, "<=", 1e-9,
        "theory");
    r.info["farfield_L_quarter"] = far_q;
    r.info["farfield_L_half"] = far_h;
    r.info["farfield_L"] = far_L;
    r.info["pseudo_time_plus"] = plus.pseudo_time;

    const ReducedState f = init_reduced(make_reduced_ic(c.initial), c.grid);
    const auto [pp, pm] = trapped_mass_prediction(f, plus.psi, minus.psi);
    r.info["predicted_trapped_plus"] = pp;
    r.info["predicted_trapped_minus"] = pm;
    r.info["initial_mass"] = f.total();

    const GridSpec& g = c.grid;
    Csv csv(dir, "stationary.csv", "x2,theta,psi_plus,psi_minus", r);
    for (int j = 0; j < g.n_x2; ++j)
        for (int k = 0; k < g.n_theta; ++k) csv.row(g.x2(j), g.theta(k), plus.psi.at(j, k), minus.psi.at(j, k));
    finish(r);
    return r;
}

// ---------------------------------------------------------------- Hoelder

ExperimentReport holder_report(const RunConfig& c) {
    ExperimentReport r;
    r.experiment = experiment_name(Experiment::HolderSuite);
    const std::string dir = out_dir(c);
    const GridSpec& g = c.grid;
    ReducedState s = init_reduced(make_reduced_ic(c.initial), g);
    double finf = 0.0;
    for (double v : s.rho1.values) finf = std::max(finf, v);
    const long steps = std::lround(c.horizon / g.dt);
    for (long n = 0; n < steps; ++n) s = advance_reduced(s, g.dt);
    const double t = s.time;

    HolderParams hp = c.profiles.holder;
    hp.alpha = c.profiles.alpha_holder;
    const SelfSimilarProfile prof(hp);
    long in_region = 0, held = 0;
    Csv csv(dir, "comparison.csv", "x2,theta,f,bound", r);
    for (int j = 1; j < g.n_x2; ++j)
        for (int k = 0; k < g.n_theta; ++k) {
            const double x2 = g.x2(j), th = g.theta(k);
            const auto v = prof.evaluate(t, x2, th);
            if (!v.in_region) continue;
            ++in_region;
            const double bound = finf * v.value + c.profiles.eps_c * fstar0(x2, th, hp);
            if (s.rho1.at(j, k) <= bound) ++held;
            csv.row(x2, th, s.rho1.at(j, k), bound);
        }
    const double frac = in_region ? static_cast<double>(held) / in_region : 0.0;
    add(r, "comparison_fraction", frac, ">=", 0.99, "theory");
    r.info["region_nodes"] = static_cast<double>(in_region);
    if (in_region == 0) r.notes.push_back("no grid node inside the validity region");

    // local exponents over matched ranges x2 in [dx2, 8 dx2] and |theta| = x2^{1/3} on the first row
    const int k0 = g.k_zero();
    std::vector<double> xs, ys, ts, fs;
    for (int j = 1; j <= 8 && j < g.n_x2; ++j)
        if (s.rho1.at(j, k0) > 0.0) {
            xs.push_back(g.x2(j));
            ys.push_back(s.rho1.at(j, k0));
        }
    const double th_lo = std::cbrt(g.x2(1)), th_hi = std::cbrt(g.x2(std::min(8, g.n_x2 - 1)));
    for (int k = k0 - 1; k >= 0; --k) {
        const double a = -g.theta(k);
        if (a < th_lo - 1e-12) continue;
        if (a > th_hi + 1e-12) break;
        if (s.rho1.at(1, k) > 0.0) {
            ts.push_back(a);
            fs.push_back(s.rho1.at(1, k));
        }
    }
    Csv fit(dir, "holder_fits.csv", "direction,coordinate,f", r);
    for (std::size_t i = 0; i < xs.size(); ++i) fit.row("x2", xs[i], ys[i]);
    for (std::size_t i = 0; i < ts.size(); ++i) fit.row("theta", ts[i], fs[i]);
    if (xs.size() < 3 || ts.size() < 3) {
        r.notes.push_back("insufficient dynamic range for the exponent fits");
        add(r, "x2_exponent", NAN, ">", 0.0, "theory");
        add(r, "exponent_ratio_error", NAN, "<=", 0.3, "theory");
    } else {
        const double sx = fit_loglog_slope(xs, ys), st = fit_loglog_slope(ts, fs);
        add(r, "x2_exponent", sx, ">", 0.0, "theory");
        add(r, "exponent_ratio_error", std::abs(st / sx / 3.0 - 1.0), "<=", 0.3, "theory");
        r.info["theta_exponent"] = st;
        r.info["exponent_ratio"] = st / sx;
        r.info["x2_exponent_in_band"] = (sx > 0.0 && sx < 1.0 / 6.0) ? 1.0 : 0.0;
        r.info["theta_exponent_in_band"] = (st > 0.0 && st < 0.5) ? 1.0 : 0.0;
    }
    finish(r);
    return r;
}

// ---------------------------------------------------------------- special functions

ExperimentReport specfun_suite(const RunConfig& c) {
    ExperimentReport r;
    r.experiment = experiment_name(Experiment::SpecfunSuite);
    const std::string dir = out_dir(c);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); };
    Csv csv(dir, "lattice.csv", "function,a,b,z,value,oracle", r);

    double m_err = 0.0, u_err = 0.0;
    for (double a : {-0.15, -0.05, 0.05, 0.5, 1.2})
        for (double b : {2.0 / 3.0, 5.0 / 3.0})
            for (double z : {-5.0, -1.0, -0.1, 0.5, 3.0}) {
                const double v = kummer_m(a, b, z), o = oracle::kummer_series(a, b, z);
                m_err = std::max(m_err, rel(v, o));
                csv.row("M", a, b, z, v, o);
            }
    for (double a : {0.05, 0.5, 1.0, 1.5, 2.5})
        for (double b : {2.0 / 3.0, 5.0 / 3.0})
            for (double z : {0.1, 0.5, 1.0, 2.0, 5.0}) {
                const double v = tricomi_u(a, b, z), o = oracle::tricomi_laplace(a, b, z);
                u_err = std::max(u_err, rel(v, o));
                csv.row("U", a, b, z, v, o);
            }
    add(r, "kummer_m_max_rel_error", m_err, "<=", 1e-8, "calibrated");
    add(r, "tricomi_u_max_rel_error", u_err, "<=", 1e-8, "calibrated");

    const HolderParams& hp = c.profiles.holder;
    double lam = 0.0;
    for (int i = 0; i <= 400; ++i) {
        double scale;
        const double res = lambda_ode_residual(-10.0 + 0.05 * i, hp, &scale);
        lam = std::max(lam, std::abs(res) / scale);
    }
    add(r, "lambda_ode_residual", lam, "<=", 1e-6, "theory");

    double fs = 0.0;
    for (double x2 : {1e-4, 1e-3, 1e-2, 0.1, 1.0})
        for (double th : {-0.5, -0.3, -0.1, -0.02, 0.0, 0.02, 0.1, 0.3, 0.5}) {
            double scale;
            const double res = fstar0_residual(x2, th, hp, &scale);
            fs = std::max(fs, std::abs(res) / scale);
        }
    add(r, "fstar0_residual", fs, "<=", 1e-8, "theory");

    // (-sin d_x2 - d_th^2) F_lambda written out by hand
    double formula = 0.0, sign = -INFINITY;
    for (double l : {0.0, 0.05, 0.1, 0.15, 0.2}) {
        SupersolutionParams sp = c.profiles.super;
        sp.lambda = l;
        for (int i = 0; i <= 20; ++i)
            for (int k = 0; k < 64; ++k) {
                const double x2 = 0.25 * i, th = -kPi + k * kPi / 32;
                const double e = std::exp(-l * x2);
                const double F = e * (1.0 - l * std::sin(th) - l * l / 8.0 * std::cos(2 * th));
                const double hand = l * std::sin(th) * F - e * (l * std::sin(th) + 0.5 * l * l * std::cos(2 * th));
                const double res = stationary_supersol_residual(x2, th, sp);
                formula = std::max(formula, std::abs(res - hand));
                sign = std::max(sign, res);
            }
    }
    add(r, "F_lambda_formula_error", formula, "<=", 1e-14, "theory");
    add(r, "F_lambda_max_residual", sign, "<=", 0.0, "theory");

    double pde = 0.0, scaling = 0.0;
    for (double y : {1e-4, 1e-2, 0.3, 1.0, 4.0})
        for (double z : {-1.5, -0.4, -0.05, 0.0, 0.05, 0.4, 1.5}) {
            const Derivs2 d = f0_selfsim_derivs(y, z, hp);
            const double s1 = std::abs(d.d_bb) + std::abs(z * d.d_a) + std::abs(d.v);
            pde = std::max(pde, std::abs(d.d_bb - z * d.d_a) / s1);
            const double lhs = 0.5 * z * d.d_b + 1.5 * y * d.d_a;
            const double s2 = std::abs(0.5 * z * d.d_b) + std::abs(1.5 * y * d.d_a) + std::abs(d.v);
            scaling = std::max(scaling, std::abs(lhs - 1.5 * hp.alpha * d.v) / s2);
        }
    add(r, "F0_equation_residual", pde, "<=", 1e-6, "theory");
    add(r, "F0_scaling_residual", scaling, "<=", 1e-6, "theory");
    finish(r);
    return r;
}

// ---------------------------------------------------------------- Monte Carlo

namespace {

struct McComparison {
    double l1_bins = 0.0;
    double l1_wall = 0.0;
    double noise = 0.0;
    double l1_t0 = 0.0;
    double d_eff = 0.0;
    EmpiricalFields mc;
    ReducedState pde;
};

// Coarse (x2, theta) bins over the reduced grid: block of nodes per bin.
std::vector<double> coarse_bins(const GridSpec& g, const std::function<double(int, int)>& mass, int bx, int bt) {
    const int nbx = (g.n_x2 + bx - 1) / bx, nbt = g.n_theta / bt;
    std::vector<double> out(static_cast<std::size_t>(nbx) * nbt, 0.0);
    for (int j = 0; j < g.n_x2; ++j)
        for (int k = 0; k < g.n_theta; ++k) out[(j / bx) * nbt + k / bt] += mass(j, k);
    return out;
}

McComparison compare_mc_pde(const RunConfig& c, double eps, long n_chains, std::uint64_t seed) {
    McComparison m;
    GridSpec g = c.grid;
    m.d_eff = estimate_diffusion(eps, 2000000, seed ^ 0x5eedULL);
    g.D = m.d_eff;
    ReducedState f = init_reduced(make_reduced_ic(c.initial), g);

    // initial chains drawn from the discrete initial density, uniform within each cell
    std::vector<ChainState> init(static_cast<std::size_t>(n_chains));
    {
        std::mt19937_64 rng(seed);
        std::discrete_distribution<std::size_t> pick(f.rho1.values.begin(), f.rho1.values.end());
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (auto& s : init) {
            const std::size_t idx = pick(rng);
            const int j = static_cast<int>(idx / g.n_theta), k = static_cast<int>(idx % g.n_theta);
            s.x2 = std::max(0.0, g.x2(j) + u(rng) * g.dx2());
            s.theta = wrap_angle(g.theta(k) + u(rng) * g.dtheta());
        }
    }
    ChainParams p;
    p.epsilon = eps;
    p.n_steps = ChainParams::steps_for_length(c.horizon, eps);
    p.seed = seed;
    TrapBands bands = TrapBands::for_epsilon(eps, c.chain.band_c_x2, c.chain.band_c_theta);
    bands.by_contact = c.chain.by_contact;

    const int bx = std::max(1, static_cast<int>(std::lround(c.chain.bin_x2 / g.dx2())));
    const int bt = g.n_theta / c.chain.bin_theta;
    const double vol = g.reduced_cell_volume();
    auto distance = [&](const EmpiricalFields& e, const ReducedState& s, double* noise) {
        const GridSpec& eg = e.f.grid;
        auto mc = coarse_bins(
            g,
            [&](int j, int k) {
                double acc = 0.0;
                for (int i = 0; i < eg.n_x1; ++i) acc += e.f.at(i, j, k);
                return acc * eg.cell_volume();
            },
            bx, bt);
        auto pd = coarse_bins(g, [&](int j, int k) { return s.rho1.at(j, k) * vol; }, bx, bt);
        double d = 0.0, nz = 0.0;
        for (std::size_t b = 0; b < mc.size(); ++b) {
            d += std::abs(mc[b] - pd[b]);
            // mean absolute deviation of a binomial count share
            nz += std::sqrt(2.0 * pd[b] * (1.0 - std::min(1.0, pd[b])) / (kPi * n_chains));
        }
        if (noise) *noise = nz;
        return d;
    };
    ChainEnsemble start;
    start.chains = init;
    m.l1_t0 = distance(empirical_fields(start, g, bands), f, nullptr);

    const ChainEnsemble ens = simulate_ensemble(p, init, c.threads);
    const long steps = std::lround(c.horizon / g.dt);
    for (long n = 0; n < steps; ++n) f = advance_reduced(f, g.dt);
    m.mc = empirical_fields(ens, g, bands);
    m.pde = f;
    m.l1_bins = distance(m.mc, f, &m.noise);
    m.l1_wall = std::abs(m.mc.plus_mass - f.trapped_plus) + std::abs(m.mc.minus_mass - f.trapped_minus) +
                std::abs(m.mc.escaped - f.escaped);
    return m;
}

}  // namespace

ExperimentReport mc_vs_pde(const RunConfig& c) {
    ExperimentReport r;
    r.experiment = experiment_name(Experiment::McVsPde);
    const std::string dir = out_dir(c);
    const double tol = 0.05;
    const McComparison ref = compare_mc_pde(c, c.chain.epsilon, c.chain.n_chains, c.seed);
    const double d_ref = ref.l1_bins + ref.l1_wall;
    add(r, "l1_distance", d_ref, "<=", tol, "calibrated");
    add(r, "l1_distance_t0", ref.l1_t0, "<=", 0.01, "sanity");
    add(r, "noise_floor", ref.noise, "<", tol, "calibrated");
    if (ref.noise >= tol) r.notes.push_back("ensemble too small: standard error dominates the tolerance");
    r.info["l1_bins"] = ref.l1_bins;
    r.info["l1_wall"] = ref.l1_wall;
    r.info["d_eff"] = ref.d_eff;
    r.info["mc_trapped_plus"] = ref.mc.plus_mass;
    r.info["mc_trapped_minus"] = ref.mc.minus_mass;
    r.info["pde_trapped_plus"] = ref.pde.trapped_plus;
    r.info["pde_trapped_minus"] = ref.pde.trapped_minus;
    Csv csv(dir, "mc_vs_pde.csv", "epsilon,n_chains,l1_bins,l1_wall,l1_total,noise", r);
    csv.row(c.chain.epsilon, c.chain.n_chains, ref.l1_bins, ref.l1_wall, d_ref, ref.noise);
    if (c.chain.trend) {
        const long n_coarse = std::max(1L, c.chain.n_chains / 4);
        const McComparison coarse = compare_mc_pde(c, 2 * c.chain.epsilon, n_coarse, c.seed + 1);
        const double d_coarse = coarse.l1_bins + coarse.l1_wall;
        add(r, "trend_excess", d_ref - d_coarse, "<=", 0.0, "calibrated");
        r.info["l1_distance_coarse"] = d_coarse;
        r.info["noise_floor_coarse"] = coarse.noise;
        csv.row(2 * c.chain.epsilon, n_coarse, coarse.l1_bins, coarse.l1_wall, d_coarse, coarse.noise);
    }
    r.notes.push_back(c.chain.by_contact ? "trapped chains: touched the wall at least once"
                                         : "trapped chains: inside the wall band");
    finish(r);
    return r;
}

ExperimentReport deviation_scaling(const RunConfig& c) {
    ExperimentReport r;
    r.experiment = experiment_name(Experiment::DeviationScaling);
    const std::string dir = out_dir(c);
    Csv csv(dir, "deviation.csv", "epsilon,trapped_fraction,median_deviation,p90_deviation", r);
    std::vector<double> eps, med;
    for (double e : c.chain.sweep) {
        ChainParams p;
        p.epsilon = e;
        p.n_steps = ChainParams::steps_for_length(c.chain.length, e);
        p.x0 = {0.0, c.chain.sweep_start_x2, -kPi / 2};
        p.seed = c.seed;
        const auto ens = simulate_ensemble(p, c.chain.sweep_chains, c.threads);
        auto d = post_trap_deviations(ens);
        if (d.empty()) throw std::runtime_error("deviation_scaling: no chain reached the wall at epsilon " + std::to_string(e));
        std::sort(d.begin(), d.end());
        const double m = d[d.size() / 2], p90 = d[(d.size() * 9) / 10];
        const double frac = static_cast<double>(d.size()) / ens.chains.size();
        csv.row(e, frac, m, p90);
        eps.push_back(e);
        med.push_back(std::max(m, 1e-300));
        r.info["median_deviation_eps_" + std::to_string(e)] = m;
    }
    const double slope = fit_loglog_slope(eps, med);
    add(r, "deviation_exponent_error", std::abs(slope - 0.5), "<=", 0.15, "theory");
    r.info["deviation_exponent"] = slope;
    finish(r);
    return r;
}

// ---------------------------------------------------------------- dispatch

ExperimentReport run(const RunConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport r;
    switch (cfg.experiment) {
        case Experiment::MassBalance: r = mass_balance(cfg); break;
        case Experiment::McVsPde: r = mc_vs_pde(cfg); break;
        case Experiment::Duality: r = duality_experiment(cfg); break;
        case Experiment::LongChain: r = long_chain_report(cfg); break;
        case Experiment::StationarySuite: r = stationary_suite(cfg); break;
        case Experiment::HolderSuite: r = holder_report(cfg); break;
        case Experiment::AdjointCertificates: r = adjoint_certificates(cfg); break;
        case Experiment::SpecfunSuite: r = specfun_suite(cfg); break;
        case Experiment::DeviationScaling: r = deviation_scaling(cfg); break;
    }
    r.info["runtime_seconds"] = seconds_since(t0);
    r.input_hash = content_hash(cfg.source_text.empty() ? config_json(cfg).dump() : cfg.source_text);
    const std::string dir = out_dir(cfg);
    if (!dir.empty()) {
        const std::string path = (fs::path(dir) / "report.json").string();
        r.artifacts.push_back(path);
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << report_json(r, cfg) << '\n';
    }
    return r;
}

}  // namespace polykin
