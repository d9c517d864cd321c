#pragma once

#include <random>
#include <vector>

#include "emg/market.hpp"

namespace emg::test {

// Symmetric baseline: two standard agents, two producers, one period,
// linear technology with slack capacity.
inline MarketConfig baseline_config() {
    MarketConfig cfg;
    cfg.T = 1;
    cfg.M = 2;
    cfg.P = 2;
    cfg.theta = 1.0;
    cfg.c = 1.0;
    cfg.K_bar = 10.0;
    cfg.omega = {10.0, 10.0};
    cfg.utility = {
        {{1.0}, 0.2},  // standard agents: mostly electricity
        {{1.0}, 0.2},
        {{0.2}, 1.0},  // producers: mostly numeraire
        {{0.2}, 1.0},
    };
    cfg.money_supply = 1.0;
    return cfg;
}

inline MarketConfig random_config(std::mt19937& rng, int max_T = 3, int max_M = 5, int max_P = 5) {
    std::uniform_int_distribution<int> Td(1, max_T), Md(1, max_M), Pd(1, max_P);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    MarketConfig cfg;
    cfg.T = Td(rng);
    cfg.M = Md(rng);
    cfg.P = Pd(rng);
    cfg.theta = u(rng);
    cfg.c = 0.5 + 0.5 * u(rng);
    cfg.K_bar = 4.0 + 4.0 * u(rng);
    for (int h = 0; h < cfg.M; ++h) cfg.omega.push_back(2.0 + 4.0 * u(rng));
    for (int i = 0; i < cfg.M + cfg.P; ++i) {
        UtilityWeights w;
        for (int t = 0; t < cfg.T; ++t) w.elec.push_back(u(rng));
        w.numeraire = 0.5 * u(rng);
        cfg.utility.push_back(w);
    }
    return cfg;
}

inline StrategyProfile random_profile(const MarketConfig& cfg, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    StrategyProfile p;
    p.standard.resize(cfg.M);
    for (int h = 0; h < cfg.M; ++h) {
        auto& s = p.standard[h];
        s.omega_offer = cfg.omega[h];
        for (int t = 0; t < cfg.T; ++t) s.b.push_back(u(rng) * cfg.omega[h] * 0.3);
        s.xi = u(rng) * cfg.omega[h] * 0.3;
    }
    p.producer.resize(cfg.P);
    for (int j = 0; j < cfg.P; ++j) {
        auto& s = p.producer[j];
        for (int t = 0; t < cfg.T; ++t) {
            s.b.push_back(u(rng));
            s.q.push_back(u(rng) * cfg.K_bar);
        }
        s.b0 = u(rng) * 3.0;
    }
    return p;
}

}  // namespace emg::test
