#include <stdexcept>
#include <cmath>

#include "doctest.h"
#include "emg/equilibrium.hpp"
#include "test_util.hpp"

using namespace emg;

TEST_CASE("zero-bid initialization returns the trivial equilibrium, flagged") {
    auto cfg = test::baseline_config();
    StrategyProfile zero;
    zero.standard = {{{0.0}, 0.0, 10.0}, {{0.0}, 0.0, 10.0}};
    zero.producer = {{{0.0}, 0.0, {0.0}, 0.0}, {{0.0}, 0.0, {0.0}, 0.0}};
    auto eq = solve_nash(cfg, zero);
    CHECK(eq.trivial);
}

TEST_CASE("symmetric economy converges to a symmetric interior equilibrium") {
    auto cfg = test::baseline_config();
    auto eq = solve_nash(cfg);
    REQUIRE(eq.converged);
    CHECK_FALSE(eq.trivial);
    CHECK(eq.prices.defined_mask[0]);
    // identical agents play identical strategies
    CHECK(eq.profile.standard[0].b[0] ==
          doctest::Approx(eq.profile.standard[1].b[0]).epsilon(1e-6));
    CHECK(eq.profile.standard[0].xi == doctest::Approx(eq.profile.standard[1].xi).epsilon(1e-6));
    CHECK(eq.profile.producer[0].q[0] ==
          doctest::Approx(eq.profile.producer[1].q[0]).epsilon(1e-6));
    for (const auto& rep : eq.foc_reports) CHECK(rep.max_residual <= 1e-6);
    // normalization pins the numeraire bid total
    auto agg = compute_aggregates(eq.profile, cfg);
    CHECK(agg.B0 == doctest::Approx(cfg.money_supply).epsilon(1e-10));
    // fixed point: re-running best responses moves nothing
    for (int h = 0; h < cfg.M; ++h) {
        auto br = standard_best_response(h, agg, cfg);
        CHECK(std::fabs(br.strategy.b[0] - eq.profile.standard[h].b[0]) <= 1e-6);
    }
    // clearing at the equilibrium allocation
    CHECK(market_clearing_residuals(eq.allocations, agg).max_abs() <= 1e-10);
}

TEST_CASE("scaled initializations land on the same real allocation") {
    auto cfg = test::baseline_config();
    auto init = default_interior_profile(cfg);
    auto eq1 = solve_nash(cfg, init);
    auto scaled = init;
    for (auto& s : scaled.standard) {
        for (double& v : s.b) v *= 10.0;
        s.xi *= 10.0;
    }
    for (auto& s : scaled.producer) {
        for (double& v : s.b) v *= 10.0;
        s.b0 *= 10.0;
    }
    auto eq2 = solve_nash(cfg, scaled);
    REQUIRE(eq1.converged);
    REQUIRE(eq2.converged);
    for (int i = 0; i < cfg.num_agents(); ++i) {
        CHECK(eq1.allocations.x[i][0] == doctest::Approx(eq2.allocations.x[i][0]).epsilon(1e-6));
        CHECK(eq1.allocations.x0[i] == doctest::Approx(eq2.allocations.x0[i]).epsilon(1e-6));
    }
}

TEST_CASE("non-interior initialization is rejected with guidance") {
    auto cfg = test::baseline_config();
    auto init = default_interior_profile(cfg);
    init.standard[0].b[0] = 0.0;  // positive-weight good, zero allocation
    init.standard[0].xi = 0.5;
    CHECK_THROWS_AS(solve_nash(cfg, init), std::invalid_argument);
}

TEST_CASE("normalize_nominal") {
    auto cfg = test::baseline_config();
    auto p = default_interior_profile(cfg);
    auto agg = compute_aggregates(p, cfg);
    auto normed = normalize_nominal(p, 1.0);
    auto aggn = compute_aggregates(normed, cfg);
    CHECK(aggn.B0 == doctest::Approx(1.0).epsilon(1e-12));
    // allocations invariant
    auto a0 = allocate(p, agg, cfg);
    auto a1 = allocate(normed, aggn, cfg);
    for (int i = 0; i < cfg.num_agents(); ++i) {
        CHECK(a0.x[i][0] == doctest::Approx(a1.x[i][0]).epsilon(1e-12));
        CHECK(a0.x0[i] == doctest::Approx(a1.x0[i]).epsilon(1e-12));
    }
    // already normalized: identity
    auto normed2 = normalize_nominal(normed, 1.0);
    CHECK(normed2.standard[0].xi == doctest::Approx(normed.standard[0].xi).epsilon(1e-14));
    // trivial profile: no-op
    StrategyProfile zero;
    zero.standard = {{{0.0}, 0.0, 10.0}, {{0.0}, 0.0, 10.0}};
    zero.producer = {{{0.0}, 0.0, {0.0}, 0.0}, {{0.0}, 0.0, {0.0}, 0.0}};
    auto z2 = normalize_nominal(zero, 1.0);
    CHECK(z2.standard[0].xi == 0.0);
}

TEST_CASE("replicate_economy") {
    auto cfg = test::baseline_config();
    auto r1 = replicate_economy(cfg, 1);
    CHECK(r1.M == cfg.M);
    CHECK(r1.P == cfg.P);
    auto r2 = replicate_economy(cfg, 2);
    CHECK(r2.M == 4);
    CHECK(r2.P == 4);
    CHECK(r2.omega == std::vector<double>{10.0, 10.0, 10.0, 10.0});
    CHECK(r2.total_endowment() / r2.M == doctest::Approx(cfg.total_endowment() / cfg.M));
    CHECK(r2.utility[2].elec == cfg.utility[0].elec);
    CHECK(r2.utility[4].numeraire == cfg.utility[2].numeraire);
}

TEST_CASE("competitive benchmark: linear technology prices at marginal cost") {
    auto cfg = test::baseline_config();
    auto bench = competitive_benchmark(cfg);
    CHECK(bench.excess_demand_residual <= 1e-8);
    // capacity slack and interior demand: p = 1/theta
    CHECK(bench.p[0] == doctest::Approx(1.0 / cfg.theta).epsilon(1e-10));
    CHECK(bench.profit[0] == doctest::Approx(0.0));
}

TEST_CASE("competitive benchmark: decreasing returns tatonnement clears") {
    auto cfg = test::baseline_config();
    cfg.c = 0.7;
    auto bench = competitive_benchmark(cfg);
    CHECK(bench.excess_demand_residual <= 1e-8);
    CHECK(bench.p[0] > 0.0);
    CHECK(bench.profit[0] > 0.0);  // strictly decreasing returns earn rents
}

TEST_CASE("competitive benchmark: endowment scaling with linear slack technology") {
    auto cfg = test::baseline_config();
    cfg.K_bar = 100.0;  // keep capacity slack after scaling
    auto b1 = competitive_benchmark(cfg);
    auto cfg2 = cfg;
    cfg2.omega = {20.0, 20.0};
    auto b2 = competitive_benchmark(cfg2);
    CHECK(b2.p[0] == doctest::Approx(b1.p[0]).epsilon(1e-9));
    CHECK(b2.x0[0] == doctest::Approx(2.0 * b1.x0[0]).epsilon(1e-9));
}

TEST_CASE("competitive benchmark refuses increasing returns") {
    auto cfg = test::baseline_config();
    cfg.c = 1.5;
    CHECK_THROWS_WITH_AS(competitive_benchmark(cfg),
                         "increasing returns unsupported in Walrasian mode",
                         std::invalid_argument);
}

TEST_CASE("jacobi and gauss-seidel reach the same equilibrium") {
    auto cfg = test::baseline_config();
    SolveOptions gs;
    auto eq_gs = solve_nash(cfg, std::nullopt, gs);
    SolveOptions jc = gs;
    jc.mode = SweepMode::Jacobi;
    auto eq_jc = solve_nash(cfg, std::nullopt, jc);
    REQUIRE(eq_gs.converged);
    REQUIRE(eq_jc.converged);
    for (int i = 0; i < cfg.num_agents(); ++i)
        CHECK(eq_gs.allocations.x[i][0] ==
              doctest::Approx(eq_jc.allocations.x[i][0]).epsilon(1e-5));
}

TEST_CASE("solver runs are bitwise reproducible") {
    auto cfg = test::baseline_config();
    auto eq1 = solve_nash(cfg);
    auto eq2 = solve_nash(cfg);
    CHECK(eq1.profile.standard[0].b[0] == eq2.profile.standard[0].b[0]);
    CHECK(eq1.profile.producer[0].q[0] == eq2.profile.producer[0].q[0]);
    CHECK(eq1.iterations == eq2.iterations);
}

TEST_CASE("permutation equivariance on a symmetric instance") {
    auto cfg = test::baseline_config();
    cfg.omega = {10.0, 6.0};  // break symmetry between the two standard agents
    cfg.utility[1] = {{0.8}, 0.3};
    auto eq = solve_nash(cfg);
    REQUIRE(eq.converged);
    // swap the two standard agents and re-solve: strategies swap too
    auto cfg2 = cfg;
    std::swap(cfg2.omega[0], cfg2.omega[1]);
    std::swap(cfg2.utility[0], cfg2.utility[1]);
    auto eq2 = solve_nash(cfg2);
    REQUIRE(eq2.converged);
    CHECK(eq.profile.standard[0].b[0] ==
          doctest::Approx(eq2.profile.standard[1].b[0]).epsilon(1e-6));
    CHECK(eq.profile.standard[1].xi ==
          doctest::Approx(eq2.profile.standard[0].xi).epsilon(1e-6));
}

TEST_CASE("replication shrinks the gap to competitive prices") {
    auto cfg = test::baseline_config();
    auto rows = convergence_experiment(cfg, {1, 2, 4});
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) {
        CHECK(row.converged);
        CHECK(row.gap > 0.0);
    }
    CHECK(rows[1].gap <= rows[0].gap * 1.05);
    CHECK(rows[2].gap <= rows[1].gap * 1.05);
}
