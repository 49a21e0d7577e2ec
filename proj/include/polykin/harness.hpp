#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "polykin/adjoint.hpp"
#include "polykin/chain_mc.hpp"
#include "polykin/core.hpp"
#include "polykin/kinetic.hpp"
#include "polykin/specfun.hpp"
#include "polykin/stationary.hpp"

namespace polykin {

enum class Experiment {
    MassBalance,
    McVsPde,
    Duality,
    LongChain,
    StationarySuite,
    HolderSuite,
    AdjointCertificates,
    SpecfunSuite,
    DeviationScaling,
};

const std::vector<Experiment>& all_experiments();
std::string experiment_name(Experiment e);
Experiment parse_experiment(const std::string& s);

// Thrown for invalid configuration; `field` is the dotted TOML key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& msg)
        : std::invalid_argument(field + ": " + msg), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct InitialSection {
    std::string kind = "point";  // point | gaussian
    double x2 = 1.0;
    double theta = -kPi / 2;
    double sigma_x2 = 0.0;  // 0 picks the kinetic default
    double sigma_theta = 0.0;
};

struct ChainSection {
    double epsilon = 1e-3;
    double length = 1.0;
    long n_chains = 1000000;
    double band_c_x2 = 2.0;
    double band_c_theta = 2.0;
    bool by_contact = true;       // MC-vs-PDE classification
    double bin_x2 = 0.25;         // coarse bin width in x2
    int bin_theta = 8;            // coarse bins over the circle
    bool trend = true;            // also run (2 eps, n/4) for the trend
    std::vector<double> sweep{1e-2, 1e-3, 1e-4};  // deviation scaling
    long sweep_chains = 2000;
    double sweep_start_x2 = 0.02;
};

struct AdjointSection {
    double epsilon = 0.2;
    double kappa = 0.2;
    double lambda = 0.5;
    int level = 1;            // duality: grid multiplier 2^level
    double dt_ratio = 0.5;    // duality: forward dt / dx2
    std::vector<double> times{0.0, 0.5, 1.0, 2.0, 4.0};
    int n_random = 20;
    double horizon = 5.0;     // certificates: marching time
};

struct ProfileSection {
    HolderParams holder;       // Lambda / F0 checks
    double alpha_holder = 0.05;  // corrected profile used in the comparison
    double eps_c = 0.01;
    SupersolutionParams super;
    double stationary_epsilon = 0.2;
    double stationary_tol = 1e-7;
};

struct RunConfig {
    Experiment experiment = Experiment::MassBalance;
    std::uint64_t seed = 1;
    std::string output_dir;
    int threads = 1;
    double horizon = 10.0;
    double window = 4.0;  // long_chain translation window
    InitialSection initial;
    GridSpec grid;
    ChainSection chain;
    AdjointSection adjoint;
    ProfileSection profiles;
    std::string source_text;  // config file contents, for the input hash

    void validate() const;  // throws ConfigError
};

// The reference setup for an experiment; TOML files override it key by key.
RunConfig default_config(Experiment e);
RunConfig parse_config(const std::string& toml_text, const std::string& origin = "<string>");
RunConfig load_config(const std::string& path);

struct Metric {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation = "<=";  // value relation threshold must hold
    std::string label;            // theory: proven property; calibrated: threshold fixed by pilot runs; sanity
    bool gate = true;             // counts toward pass/fail
    bool pass = false;
};

struct ExperimentReport {
    std::string experiment;
    bool pass = false;
    std::vector<Metric> metrics;
    std::map<std::string, double> info;  // reported, not gated
    std::vector<std::string> notes;
    std::vector<std::string> artifacts;
    std::string input_hash;

    const Metric& metric(const std::string& name) const;
    double value(const std::string& name) const;
};

// Runs the experiment; writes CSV/JSON under output_dir/<experiment>/ when output_dir is set.
ExperimentReport run(const RunConfig& cfg);

ExperimentReport mass_balance(const RunConfig& cfg);
ExperimentReport long_chain_report(const RunConfig& cfg);
ExperimentReport duality_experiment(const RunConfig& cfg);
ExperimentReport adjoint_certificates(const RunConfig& cfg);
ExperimentReport stationary_suite(const RunConfig& cfg);
ExperimentReport holder_report(const RunConfig& cfg);
ExperimentReport specfun_suite(const RunConfig& cfg);
ExperimentReport mc_vs_pde(const RunConfig& cfg);
ExperimentReport deviation_scaling(const RunConfig& cfg);

// Git blob hash (SHA-1 of "blob <size>\0" + content), hex.
std::string content_hash(const std::string& content);

std::string report_json(const ExperimentReport& r, const RunConfig& cfg);

}  // namespace polykin
