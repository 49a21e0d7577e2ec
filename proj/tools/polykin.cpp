// polykin command line: run, validate, list-experiments.
// Exit codes: 0 pass, 1 criterion failed, 2 bad config, 3 runtime error.
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "polykin/harness.hpp"

namespace {

void print_report(const polykin::ExperimentReport& r) {
    std::cout << r.experiment << ": " << (r.pass ? "PASS" : "FAIL") << "  (input " << r.input_hash.substr(0, 12)
              << ")\n";
    for (const auto& m : r.metrics)
        std::cout << "  " << (m.pass ? "ok  " : (m.gate ? "FAIL" : "warn")) << ' ' << m.name << " = " << m.value
                  << "  [" << m.relation << ' ' << m.threshold << "] " << m.label << '\n';
    for (const auto& [k, v] : r.info) std::cout << "  info " << k << " = " << v << '\n';
    for (const auto& n : r.notes) std::cout << "  note " << n << '\n';
    for (const auto& a : r.artifacts) std::cout << "  wrote " << a << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"polykin: kinetic polymer model experiments"};
    app.require_subcommand(1);

    std::string config, experiment, out;
    long long seed = -1;
    int threads = 0;
    auto* run = app.add_subcommand("run", "run one experiment from a TOML config");
    run->add_option("--config", config, "TOML config file")->required();
    run->add_option("--experiment", experiment, "override experiment.name");
    run->add_option("--out", out, "output directory");
    run->add_option("--seed", seed, "override experiment.seed");
    run->add_option("--threads", threads, "worker threads");

    std::string vconfig;
    auto* validate = app.add_subcommand("validate", "parse and validate a config");
    validate->add_option("--config", vconfig, "TOML config file")->required();

    app.add_subcommand("list-experiments", "print experiment names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("list-experiments")) {
            for (auto e : polykin::all_experiments()) std::cout << polykin::experiment_name(e) << '\n';
            return 0;
        }
        if (app.got_subcommand("validate")) {
            const auto cfg = polykin::load_config(vconfig);
            std::cout << "ok: " << polykin::experiment_name(cfg.experiment) << '\n';
            return 0;
        }
        auto cfg = polykin::load_config(config);
        if (!experiment.empty()) {
            const auto base = cfg;
            cfg = polykin::default_config(polykin::parse_experiment(experiment));
            cfg.seed = base.seed;
            cfg.output_dir = base.output_dir;
            cfg.threads = base.threads;
            cfg.source_text = base.source_text + "\n# experiment override: " + experiment + '\n';
        }
        if (const char* env = std::getenv("POLYKIN_OUT")) cfg.output_dir = env;
        if (!out.empty()) cfg.output_dir = out;
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (threads > 0) cfg.threads = threads;
        cfg.validate();
        const auto r = polykin::run(cfg);
        print_report(r);
        return r.pass ? 0 : 1;
    } catch (const polykin::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
