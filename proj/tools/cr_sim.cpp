// Scenario runner and report tool.
//
//   cr_sim --config scenarios/paper_open.cfg --seed 1 --reps 1 --mode both --out out/
//   cr_sim compare out_cr/report.csv out_legacy/report.csv
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.
// Set CR_SIM_LOG=trace to echo the protocol trace to stderr.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cr/report.hpp"
#include "cr/scenario.hpp"
#include "cr/simulator.hpp"

namespace {

int run_command(const std::string& config_path, std::uint64_t seed, int reps,
                const std::string& mode_s, const std::string& out_dir) {
    cr::Scenario scenario;
    cr::RunMode mode;
    try {
        scenario = cr::load_scenario(config_path);
        mode = cr::parse_run_mode(mode_s);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }

    try {
        std::vector<cr::RunReport> reports;
        for (int i = 0; i < reps; ++i) {
            cr::Simulator sim(scenario, seed + static_cast<std::uint64_t>(i), mode);
            reports.push_back(sim.run());
        }
        cr::write_run_files(reports, out_dir);

        const char* log_env = std::getenv("CR_SIM_LOG");
        if (log_env && std::string(log_env) == "trace")
            for (const auto& r : reports)
                for (const auto& line : r.trace) std::cerr << line << '\n';

        std::vector<cr::HandoffRecord> all;
        for (const auto& r : reports)
            all.insert(all.end(), r.records.begin(), r.records.end());
        cr::write_summary(std::cout, cr::SummaryReport::from_records(all));
        std::cout << "wrote " << out_dir << "/report.csv (" << all.size() << " handoffs)\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 2;
    }
}

int compare_command(const std::string& path_a, const std::string& path_b) {
    try {
        std::ifstream fa(path_a), fb(path_b);
        if (!fa) {
            std::cerr << "config error: cannot open " << path_a << '\n';
            return 1;
        }
        if (!fb) {
            std::cerr << "config error: cannot open " << path_b << '\n';
            return 1;
        }
        const auto a = cr::read_csv(fa);
        const auto b = cr::read_csv(fb);
        std::cout << cr::compare_reports(a, b, path_a, path_b);
        return 0;
    } catch (const cr::TopologyMismatchError& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative roaming simulator"};
    app.require_subcommand(0, 1);

    std::string config_path;
    std::uint64_t seed = 1;
    int reps = 1;
    std::string mode = "both";
    std::string out_dir = "out";
    app.add_option("--config", config_path, "scenario file");
    app.add_option("--seed", seed, "base RNG seed");
    app.add_option("--reps", reps, "repetitions (seed+i each)")->check(CLI::PositiveNumber);
    app.add_option("--mode", mode, "cr|legacy|both");
    app.add_option("--out", out_dir, "output directory");

    auto* cmp = app.add_subcommand("compare", "compare two report.csv files");
    std::string path_a, path_b;
    cmp->add_option("a", path_a, "first report.csv")->required();
    cmp->add_option("b", path_b, "second report.csv")->required();

    CLI11_PARSE(app, argc, argv);

    if (cmp->parsed()) return compare_command(path_a, path_b);
    if (config_path.empty()) {
        std::cerr << "config error: --config is required\n";
        return 1;
    }
    return run_command(config_path, seed, reps, mode, out_dir);
}
