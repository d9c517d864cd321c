#include <stdexcept>
#include <cmath>
#include <random>

#include "doctest.h"
#include "emg/best_response.hpp"
#include "emg/equilibrium.hpp"
#include "test_util.hpp"

using namespace emg;

namespace {

// Central finite differences of the payoff in one coordinate.
template <typename F>
double central_diff(F f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

Aggregates aggregates_for(const MarketConfig& cfg, const StrategyProfile& p) {
    return compute_aggregates(p, cfg);
}

}  // namespace

TEST_CASE("standard best response: zero endowment forces zero bids") {
    auto cfg = test::baseline_config();
    cfg.omega[0] = 0.0;
    auto p = default_interior_profile(cfg);
    p.standard[0].omega_offer = 0.0;
    auto agg = aggregates_for(cfg, p);
    auto br = standard_best_response(0, agg, cfg);
    CHECK(br.flag == BrFlag::ZeroEndowment);
    CHECK(br.strategy.xi == 0.0);
    CHECK(br.strategy.b[0] == 0.0);
}

TEST_CASE("standard best response: no market flag when opponents are silent") {
    auto cfg = test::baseline_config();
    StrategyProfile p;
    p.standard = {{{0.0}, 0.0, 10.0}, {{0.0}, 0.0, 10.0}};
    p.producer = {{{0.0}, 0.0, {0.0}, 0.0}, {{0.0}, 0.0, {0.0}, 0.0}};
    auto agg = aggregates_for(cfg, p);
    auto br = standard_best_response(0, agg, cfg);
    CHECK(br.flag == BrFlag::NoMarket);
    CHECK(br.strategy.b[0] == 0.0);
}

TEST_CASE("standard best response: interior optimum, tight budget and low FOC residual") {
    auto cfg = test::baseline_config();
    cfg.utility[0] = {{1.0}, 1.0};
    auto p = default_interior_profile(cfg);
    auto agg = aggregates_for(cfg, p);
    auto br = standard_best_response(0, agg, cfg);
    CHECK(br.foc.max_residual <= 1e-8);
    // budget binds
    auto agg_with = aggregates_for(
        cfg, StrategyProfile{{br.strategy, p.standard[1]}, p.producer});
    auto slack = check_budget_standard(0, br.strategy, agg_with);
    CHECK(std::fabs(slack.slack) <= 1e-8);
    // oracle agreement
    auto oracle = oracle_standard_best_response(0, agg, cfg);
    CHECK(br.payoff == doctest::Approx(oracle.payoff).epsilon(1e-6));
    CHECK(br.payoff >= oracle.payoff - 1e-6);
}

TEST_CASE("standard best response approaches competitive shares in the price-taking limit") {
    auto cfg = test::baseline_config();
    cfg.utility[0] = {{1.0}, 1.0};
    auto p = default_interior_profile(cfg);
    // blow up opponent aggregates so own influence on prices vanishes
    p.standard[1].b[0] = 4000.0;
    p.standard[1].xi = 6000.0;
    p.producer[0].b0 = 3000.0;
    p.producer[0].q[0] = 10.0;
    p.producer[1].q[0] = 10.0;
    auto agg = aggregates_for(cfg, p);
    auto br = standard_best_response(0, agg, cfg);
    double budget = agg.B0_minus[0] / agg.Omega * cfg.omega[0];
    double spent_elec = br.strategy.b[0];
    double share = spent_elec / budget;
    // Cobb-Douglas expenditure share alpha_e / (alpha_e + alpha_0) = 1/2
    CHECK(share == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("producer best response: capacity binds when technology is productive") {
    auto cfg = test::baseline_config();
    cfg.theta = 50.0;
    cfg.c = 1.0;
    cfg.K_bar = 2.0;
    auto p = default_interior_profile(cfg);
    auto agg = aggregates_for(cfg, p);
    auto br = producer_best_response(0, agg, cfg);
    CHECK(br.strategy.q[0] == doctest::Approx(cfg.K_bar).epsilon(1e-9));
    CHECK(br.foc.mu[0] > 0.0);
    CHECK(std::fabs(br.foc.complementary_slackness) <= 1e-6);
    auto oracle = oracle_producer_best_response(0, agg, cfg);
    CHECK(br.payoff >= oracle.payoff - 1e-4);
}

TEST_CASE("producer best response matches the grid oracle in a duopoly") {
    auto cfg = test::baseline_config();
    auto p = default_interior_profile(cfg);
    auto agg = aggregates_for(cfg, p);
    auto br = producer_best_response(0, agg, cfg);
    auto oracle = oracle_producer_best_response(0, agg, cfg);
    CHECK(std::fabs(br.payoff - oracle.payoff) <= 1e-4);
    CHECK(br.payoff >= oracle.payoff - 1e-4);
}

TEST_CASE("producer best response: no revenue possible means zero strategy") {
    auto cfg = test::baseline_config();
    StrategyProfile p;
    p.standard = {{{0.0}, 0.0, 10.0}, {{0.0}, 0.0, 10.0}};
    p.producer = {{{0.0}, 0.0, {0.0}, 0.0}, {{0.0}, 0.0, {0.0}, 0.0}};
    auto agg = aggregates_for(cfg, p);
    auto br = producer_best_response(0, agg, cfg);
    CHECK(br.flag == BrFlag::NoRevenue);
    CHECK(br.strategy.q[0] == 0.0);
}

TEST_CASE("producer never offers nothing when a profitable deviation exists") {
    auto cfg = test::baseline_config();
    auto p = default_interior_profile(cfg);
    auto agg = aggregates_for(cfg, p);
    auto br = producer_best_response(0, agg, cfg);
    CHECK(br.strategy.q[0] > 0.0);
    CHECK(br.payoff > producer_payoff(0, ProducerStrategy{{0.0}, 0.0, {0.0}, 0.0}, agg, cfg));
}

TEST_CASE("standard FOC: detects non-optimality under asymmetric weights") {
    auto cfg = test::baseline_config();
    cfg.T = 2;
    cfg.utility = {
        {{2.0, 1.0}, 0.2}, {{1.0, 1.0}, 0.2}, {{0.2, 0.2}, 1.0}, {{0.2, 0.2}, 1.0}};
    auto p = default_interior_profile(cfg);
    // equal bids across both posts cannot satisfy the FOCs when alpha^1 = 2 alpha^2
    p.standard[0].b = {1.0, 1.0};
    p.standard[0].xi = 1.0;
    auto agg = aggregates_for(cfg, p);
    auto rep = foc_residual_standard(0, p.standard[0], agg, cfg);
    CHECK(rep.max_residual > 1e-3);
}

TEST_CASE("standard FOC: zero residual at the solver optimum") {
    auto cfg = test::baseline_config();
    auto p = default_interior_profile(cfg);
    auto agg = aggregates_for(cfg, p);
    auto br = standard_best_response(0, agg, cfg);
    auto rep = foc_residual_standard(0, br.strategy, agg, cfg);
    CHECK(rep.max_residual <= 1e-8);
    CHECK(rep.lambda > 0.0);
}

TEST_CASE("marginal utilities match finite differences") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> u(0.5, 3.0);
    for (int rep = 0; rep < 50; ++rep) {
        UtilityWeights w{{u(rng), u(rng)}, u(rng)};
        std::vector<double> x{u(rng), u(rng)};
        double x0 = u(rng);
        for (int t = 0; t < 2; ++t) {
            double analytic = w.elec[t] / x[t];
            auto f = [&](double v) {
                auto xx = x;
                xx[t] = v;
                return log_utility(w, xx, x0);
            };
            double fd = central_diff(f, x[t], 1e-6 * x[t]);
            CHECK(std::fabs(analytic - fd) <= 1e-6 * std::fabs(analytic));
        }
        double analytic0 = w.numeraire / x0;
        auto f0 = [&](double v) { return log_utility(w, x, v); };
        CHECK(std::fabs(analytic0 - central_diff(f0, x0, 1e-6 * x0)) <=
              1e-6 * std::fabs(analytic0));
    }
}

TEST_CASE("allocation derivative matches finite differences") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> u(0.5, 3.0);
    for (int rep = 0; rep < 50; ++rep) {
        double Bm = u(rng), Q = u(rng), b = u(rng);
        auto x_of = [&](double bid) { return bid / (Bm + bid) * Q; };
        double analytic = Bm * Q / ((Bm + b) * (Bm + b));
        double fd = central_diff(x_of, b, 1e-6 * b);
        CHECK(std::fabs(analytic - fd) <= 1e-6 * std::fabs(analytic));
    }
}

TEST_CASE("producer FOC: the two marginal-input forms agree") {
    auto cfg = test::baseline_config();
    cfg.c = 0.7;
    auto p = default_interior_profile(cfg);
    auto agg = aggregates_for(cfg, p);
    auto rep = foc_residual_producer(0, p.producer[0], agg, cfg);
    CHECK(rep.marginal_input_consistency <= 1e-12);
}

TEST_CASE("producer FOC: slack capacity requires mu = 0") {
    auto cfg = test::baseline_config();
    auto p = default_interior_profile(cfg);
    p.producer[0].q[0] = 0.5 * cfg.K_bar;
    auto agg = aggregates_for(cfg, p);
    auto rep = foc_residual_producer(0, p.producer[0], agg, cfg);
    CHECK(rep.mu[0] == 0.0);
    CHECK(rep.complementary_slackness == 0.0);
}

TEST_CASE("best response dominates random feasible deviations") {
    std::mt19937 rng(37);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto cfg = test::baseline_config();
    auto p = default_interior_profile(cfg);
    auto agg = aggregates_for(cfg, p);

    auto br = standard_best_response(0, agg, cfg);
    double budget = agg.B0_minus[0] / agg.Omega * cfg.omega[0];
    double w_xi = agg.Omega_minus[0] / agg.Omega;
    for (int rep = 0; rep < 100; ++rep) {
        StandardStrategy dev;
        dev.omega_offer = cfg.omega[0];
        double f1 = u(rng), f2 = u(rng) * (1.0 - f1);
        dev.b = {f1 * budget};
        dev.xi = f2 * budget / w_xi;
        CHECK(br.payoff >= standard_payoff(0, dev, agg, cfg) - 1e-6);
    }

    auto brp = producer_best_response(0, agg, cfg);
    for (int rep = 0; rep < 100; ++rep) {
        ProducerStrategy dev;
        dev.q = {u(rng) * cfg.K_bar};
        dev.b = {u(rng) * agg.B_minus[cfg.M][0]};
        // spend the full budget on the numeraire post
        double Q = agg.Q_minus[0][0] + dev.q[0];
        double rev = Q > 0.0 ? agg.B_minus[cfg.M][0] / Q * dev.q[0] : 0.0;
        double cost = Q > 0.0 ? agg.Q_minus[0][0] / Q * dev.b[0] : 0.0;
        if (cost > rev) {
            dev.b[0] = 0.0;
            cost = 0.0;
        }
        dev.b0 = rev - cost;
        CHECK(brp.payoff >= producer_payoff(0, dev, agg, cfg) - 1e-6);
    }
}

TEST_CASE("best-response payoff is monotone in endowment") {
    auto cfg = test::baseline_config();
    auto p = default_interior_profile(cfg);
    auto agg = aggregates_for(cfg, p);
    double prev = -1e300;
    for (double omega : {4.0, 8.0, 12.0, 16.0}) {
        auto cfg2 = cfg;
        cfg2.omega[0] = omega;
        auto p2 = p;
        p2.standard[0].omega_offer = omega;
        auto agg2 = aggregates_for(cfg2, p2);
        auto br = standard_best_response(0, agg2, cfg2);
        CHECK(br.payoff >= prev - 1e-9);
        prev = br.payoff;
    }
}

TEST_CASE("oracle refuses high-dimensional instances") {
    auto cfg = test::baseline_config();
    cfg.T = 4;
    cfg.utility = {{{1, 1, 1, 1}, 0.2}, {{1, 1, 1, 1}, 0.2},
                   {{0.2, 0.2, 0.2, 0.2}, 1.0}, {{0.2, 0.2, 0.2, 0.2}, 1.0}};
    auto p = default_interior_profile(cfg);
    auto agg = aggregates_for(cfg, p);
    CHECK_THROWS_AS(oracle_standard_best_response(0, agg, cfg), std::invalid_argument);
    CHECK_THROWS_AS(oracle_producer_best_response(0, agg, cfg), std::invalid_argument);
}

TEST_CASE("oracle: zero budget yields the zero strategy") {
    auto cfg = test::baseline_config();
    cfg.omega[0] = 0.0;
    auto p = default_interior_profile(cfg);
    p.standard[0].omega_offer = 0.0;
    auto agg = aggregates_for(cfg, p);
    auto oracle = oracle_standard_best_response(0, agg, cfg);
    CHECK(oracle.strategy.b[0] == 0.0);
    CHECK(oracle.strategy.xi == 0.0);
}
