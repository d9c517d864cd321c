#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emg/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Electricity market game: Nash equilibria, competitive benchmark, "
                 "crypto-in-advance layer"};

    std::string scenario_path;
    std::string out_dir = "out";
    bool print_config = false;
    double tol = -1.0, damping = -1.0;
    int max_iter = -1;
    std::string mode;
    long long seed = -1;
    std::vector<std::string> experiments;

    app.add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--tol", tol, "Override solver tolerance");
    app.add_option("--max-iter", max_iter, "Override solver iteration cap");
    app.add_option("--damping", damping, "Override best-response damping");
    app.add_option("--mode", mode, "Override sweep mode: gauss-seidel | jacobi");
    app.add_option("--seed", seed, "Override seed");
    app.add_flag("--print-config", print_config, "Echo the parsed scenario and exit");
    app.add_option("--experiment", experiments,
                   "Run only these experiments (nash | competitive | crypto-link); repeatable");

    CLI11_PARSE(app, argc, argv);

    try {
        auto scenario = emg::load_scenario(scenario_path);
        if (print_config) {
            std::cout << emg::scenario_to_json(scenario);
            return 0;
        }
        emg::RunOverrides ov;
        if (tol >= 0.0) ov.tol = tol;
        if (damping >= 0.0) ov.damping = damping;
        if (max_iter >= 0) ov.max_iter = max_iter;
        if (seed >= 0) ov.seed = static_cast<std::uint64_t>(seed);
        if (!mode.empty()) {
            if (mode == "gauss-seidel")
                ov.mode = emg::SweepMode::GaussSeidel;
            else if (mode == "jacobi")
                ov.mode = emg::SweepMode::Jacobi;
            else {
                std::cerr << "error: unknown mode '" << mode << "'\n";
                return 1;
            }
        }
        ov.experiments = experiments;
        return emg::run_scenario(scenario, out_dir, ov);
    } catch (const emg::ScenarioError& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
