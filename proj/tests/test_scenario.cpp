#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "emg/scenario.hpp"

using namespace emg;

namespace {

std::string baseline_text() {
    return R"({
  "schema_version": "1",
  "market": {
    "T": 1, "M": 2, "P": 2,
    "theta": 1.0, "c": 1.0, "rho": 0.0, "K_bar": 10.0,
    "horizon": "short_run",
    "omega": [10.0, 10.0],
    "utility_standard": [
      {"elec": [1.0], "numeraire": 0.2},
      {"elec": [1.0], "numeraire": 0.2}
    ],
    "utility_producer": [
      {"elec": [0.2], "numeraire": 1.0},
      {"elec": [0.2], "numeraire": 1.0}
    ],
    "money_supply": 1.0
  },
  "solver": {"damping": 0.5, "tol": 1e-8, "foc_tol": 1e-6, "max_iter": 2000,
             "mode": "gauss-seidel", "seed": 0},
  "crypto": {"S": 1, "v": 0.1, "state_scalings": [1.0]},
  "experiments": ["nash"]
})";
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("baseline scenario loads") {
    auto sc = parse_scenario(baseline_text());
    CHECK(sc.market.M == 2);
    CHECK(sc.market.P == 2);
    CHECK(sc.market.utility.size() == 4);
    CHECK(sc.solver.opts.damping == 0.5);
    CHECK(sc.experiments.size() == 1);
    CHECK(sc.experiments[0].kind == ExperimentKind::Nash);
}

TEST_CASE("negative parameter is rejected with the field named") {
    auto text = baseline_text();
    auto pos = text.find("\"c\": 1.0");
    text.replace(pos, 8, "\"c\": -1.0");
    CHECK_THROWS_WITH_AS(parse_scenario(text), "market: c must be > 0", ScenarioError);
}

TEST_CASE("unknown key is rejected") {
    auto text = baseline_text();
    text.replace(text.find("\"theta\""), 7, "\"thetaa\"");
    CHECK_THROWS_AS(parse_scenario(text), ScenarioError);
}

TEST_CASE("duplicate key is rejected") {
    auto text = baseline_text();
    text.replace(text.find("\"M\": 2"), 6, "\"T\": 2");
    CHECK_THROWS_AS(parse_scenario(text), ScenarioError);
}

TEST_CASE("missing required field is rejected") {
    std::string text = R"({"schema_version": "1"})";
    CHECK_THROWS_AS(parse_scenario(text), ScenarioError);
}

TEST_CASE("wrong schema version is rejected") {
    auto text = baseline_text();
    text.replace(text.find("\"schema_version\": \"1\""), 21, "\"schema_version\": \"9\"");
    CHECK_THROWS_AS(parse_scenario(text), ScenarioError);
}

TEST_CASE("replication experiment parses") {
    auto text = baseline_text();
    text.replace(text.find("[\"nash\"]"), 8, "[{\"replication\": [1, 2, 4]}]");
    auto sc = parse_scenario(text);
    REQUIRE(sc.experiments.size() == 1);
    CHECK(sc.experiments[0].kind == ExperimentKind::Replication);
    CHECK(sc.experiments[0].replications == std::vector<int>{1, 2, 4});
}

TEST_CASE("serialization round-trips") {
    auto sc = parse_scenario(baseline_text());
    auto sc2 = parse_scenario(scenario_to_json(sc));
    CHECK(sc2.market.T == sc.market.T);
    CHECK(sc2.market.omega == sc.market.omega);
    CHECK(sc2.market.utility[0].elec == sc.market.utility[0].elec);
    CHECK(sc2.market.utility[3].numeraire == sc.market.utility[3].numeraire);
    CHECK(sc2.solver.opts.tol == sc.solver.opts.tol);
    CHECK(sc2.crypto.v == sc.crypto.v);
    CHECK(sc2.experiments[0].kind == sc.experiments[0].kind);
    // canonical form is a fixed point
    CHECK(scenario_to_json(sc2) == scenario_to_json(sc));
}

TEST_CASE("run_scenario writes artifacts and reports convergence") {
    auto sc = parse_scenario(baseline_text());
    sc.experiments.push_back({ExperimentKind::Competitive, {}});
    sc.experiments.push_back({ExperimentKind::CryptoLink, {}});
    auto dir = std::filesystem::temp_directory_path() / "emg_scenario_test";
    std::filesystem::remove_all(dir);
    int code = run_scenario(sc, dir);
    CHECK(code == 0);
    CHECK(std::filesystem::exists(dir / "prices.csv"));
    CHECK(std::filesystem::exists(dir / "allocations.csv"));
    CHECK(std::filesystem::exists(dir / "foc_report.json"));
    CHECK(std::filesystem::exists(dir / "competitive_prices.csv"));
    CHECK(std::filesystem::exists(dir / "crypto.csv"));
    CHECK(std::filesystem::exists(dir / "run_meta.json"));
    auto prices = read_file(dir / "prices.csv");
    CHECK(prices.rfind("period,price\n", 0) == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("forced non-convergence exits with code 2") {
    auto sc = parse_scenario(baseline_text());
    sc.solver.opts.max_iter = 2;
    sc.solver.opts.tol = 1e-12;
    auto dir = std::filesystem::temp_directory_path() / "emg_scenario_nc";
    std::filesystem::remove_all(dir);
    int code = run_scenario(sc, dir);
    CHECK(code == 2);
    auto meta = read_file(dir / "run_meta.json");
    CHECK(meta.find("\"converged\": false") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("repeated runs are byte-identical") {
    auto sc = parse_scenario(baseline_text());
    auto d1 = std::filesystem::temp_directory_path() / "emg_det_1";
    auto d2 = std::filesystem::temp_directory_path() / "emg_det_2";
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
    CHECK(run_scenario(sc, d1) == 0);
    CHECK(run_scenario(sc, d2) == 0);
    for (const char* name : {"prices.csv", "allocations.csv", "foc_report.json"})
        CHECK(read_file(d1 / name) == read_file(d2 / name));
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}
