#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emg/crypto.hpp"
#include "emg/equilibrium.hpp"
#include "emg/market.hpp"

// Scenario files (strict JSON), experiment orchestration and artifact
// emission (CSV/JSON reports).
namespace emg {

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind { Nash, Competitive, Replication, CryptoLink };

struct Experiment {
    ExperimentKind kind = ExperimentKind::Nash;
    std::vector<int> replications;  // Replication only
};

struct SolverSection {
    SolveOptions opts;
    std::uint64_t seed = 0;
};

struct CryptoSection {
    int S = 1;
    double v = 0.0;
    std::vector<double> state_scalings{1.0};
};

struct ScenarioFile {
    std::string schema_version = "1";
    MarketConfig market;
    SolverSection solver;
    CryptoSection crypto;
    std::vector<Experiment> experiments;
};

// Strict parse: unknown keys, duplicate keys, wrong types and violated
// MarketConfig invariants are all errors.
ScenarioFile parse_scenario(const std::string& text);
ScenarioFile load_scenario(const std::filesystem::path& path);

// Canonical serialization; parse_scenario(scenario_to_json(s)) == s.
std::string scenario_to_json(const ScenarioFile& s);

struct RunOverrides {
    std::optional<double> tol;
    std::optional<double> damping;
    std::optional<int> max_iter;
    std::optional<SweepMode> mode;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> experiments;  // replaces the file's list when nonempty
};

// Executes the scenario's experiments and writes the artifact files into
// out_dir (atomically, temp + rename). Returns the process exit code:
// 0 when every requested solve converged, 2 otherwise.
int run_scenario(const ScenarioFile& scenario, const std::filesystem::path& out_dir,
                 const RunOverrides& overrides = {});

}  // namespace emg
