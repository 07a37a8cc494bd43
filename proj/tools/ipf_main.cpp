// ipf: scenario runner for the information path functional toolkit.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ipf/scenario.hpp"

namespace {

struct Globals {
    bool json = false;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string config;
    std::optional<unsigned> workers;
};

int emit(const ipf::Report& rep, const Globals& g) {
    if (g.json) {
        std::cout << rep.data.dump(2) << '\n';
        std::cerr << rep.text;
    } else {
        std::cout << rep.text;
    }
    return rep.exit_code;
}

ipf::ScenarioConfig scenario_from(const Globals& g) {
    if (g.config.empty()) throw ipf::ConfigError("--config is required for this command");
    auto sc = ipf::load_scenario(g.config);
    if (g.seed) sc.seed = g.seed;
    if (g.workers) sc.run.workers = *g.workers;
    return sc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Information path functional toolkit: worked examples, dual-strategy runs, invariant tables"};
    app.require_subcommand(1);
    Globals g;
    app.add_flag("--json", g.json, "emit a single JSON document on stdout (text goes to stderr)");
    app.add_option("--seed", g.seed, "master seed (overrides the config)");
    app.add_option("--out-dir", g.out_dir, "directory for artifacts");
    app.add_option("--config", g.config, "scenario config (JSON)");
    app.add_option("--workers", g.workers, "worker threads for ensemble simulation")->check(CLI::PositiveNumber);

    auto* ex1 = app.add_subcommand("example1", "eigenvalues before and after a sign flip");
    auto* ex2 = app.add_subcommand("example2", "imaginary starting eigenvalues");
    double beta = 1.0;
    ex2->add_option("--beta", beta, "imaginary part of the starting eigenvalue");
    auto* ex3 = app.add_subcommand("example3", "two-dimensional system with equalized end eigenvalues");
    std::string variant = "positive";
    ex3->add_option("--variant", variant, "positive | negative")->check(CLI::IsMember({"positive", "negative"}));
    auto* run = app.add_subcommand("run", "dual-strategy run from a scenario config");
    auto* inv = app.add_subcommand("invariants", "gamma table of the segment invariant");
    double gamma_max = 5.0;
    int rows = 51;
    inv->add_option("--gamma-max", gamma_max, "largest gamma");
    inv->add_option("--rows", rows, "number of rows")->check(CLI::PositiveNumber);
    auto* net = app.add_subcommand("network", "rank segments and build the information network");
    std::string input;
    double D = 2.0;
    double D0 = 2.0;
    net->add_option("--input", input, "segment log (JSON lines); otherwise --config is run first");
    net->add_option("--D", D, "process alphabet size");
    net->add_option("--D0", D0, "segment alphabet size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ipf::kExitConfig;
    }

    try {
        if (*ex1) return emit(ipf::cmd_example1(), g);
        if (*ex2) return emit(ipf::cmd_example2(beta), g);
        if (*ex3) return emit(ipf::cmd_example3(variant == "positive"), g);
        if (*run) {
            const auto sc = scenario_from(g);
            return emit(ipf::cmd_run(sc, std::filesystem::path(g.out_dir.empty() ? std::string("out") : g.out_dir)), g);
        }
        if (*inv) {
            auto rep = ipf::cmd_invariants(gamma_max, static_cast<std::size_t>(rows));
            if (!g.out_dir.empty()) {
                std::filesystem::create_directories(g.out_dir);
                ipf::write_text_file(std::filesystem::path(g.out_dir) / "gamma_table.csv", rep.text);
            }
            return emit(rep, g);
        }
        if (*net) {
            std::vector<ipf::SpectrumEntry> spec;
            if (!input.empty()) {
                std::ifstream in(input);
                if (!in) throw ipf::ConfigError("cannot open " + input);
                spec = ipf::io::read_spectrum_jsonl(in);
            } else {
                const auto sc = scenario_from(g);
                ipf::validate_scenario(sc);
                spec = ipf::run_dual_strategy(sc.system(), sc.strategy()).spectrum();
            }
            auto rep = ipf::cmd_network(spec, D, D0);
            if (!g.out_dir.empty()) {
                std::filesystem::create_directories(g.out_dir);
                ipf::write_text_file(std::filesystem::path(g.out_dir) / "network.json", rep.data.dump(2) + "\n");
            }
            return emit(rep, g);
        }
    } catch (const ipf::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return ipf::kExitNumerical;
    } catch (const ipf::Error& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return ipf::kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return ipf::kExitConfig;
    }
    return ipf::kExitConfig;
}
