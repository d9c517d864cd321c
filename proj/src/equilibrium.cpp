#include "emg/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace emg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double profile_distance(const StrategyProfile& a, const StrategyProfile& b) {
    double d = 0.0;
    for (std::size_t h = 0; h < a.standard.size(); ++h) {
        for (std::size_t t = 0; t < a.standard[h].b.size(); ++t)
            d = std::max(d, std::fabs(a.standard[h].b[t] - b.standard[h].b[t]));
        d = std::max(d, std::fabs(a.standard[h].xi - b.standard[h].xi));
    }
    for (std::size_t j = 0; j < a.producer.size(); ++j) {
        for (std::size_t t = 0; t < a.producer[j].b.size(); ++t) {
            d = std::max(d, std::fabs(a.producer[j].b[t] - b.producer[j].b[t]));
            d = std::max(d, std::fabs(a.producer[j].q[t] - b.producer[j].q[t]));
        }
        d = std::max(d, std::fabs(a.producer[j].b0 - b.producer[j].b0));
        d = std::max(d, std::fabs(a.producer[j].K - b.producer[j].K));
    }
    return d;
}

bool profile_is_zero(const StrategyProfile& p) {
    for (const auto& s : p.standard) {
        if (s.xi != 0.0) return false;
        for (double v : s.b)
            if (v != 0.0) return false;
    }
    for (const auto& s : p.producer) {
        if (s.b0 != 0.0) return false;
        for (double v : s.b)
            if (v != 0.0) return false;
        for (double v : s.q)
            if (v != 0.0) return false;
    }
    return true;
}

StandardStrategy mix(const StandardStrategy& old, const StandardStrategy& next, double d) {
    StandardStrategy s = old;
    for (std::size_t t = 0; t < s.b.size(); ++t) s.b[t] = (1.0 - d) * old.b[t] + d * next.b[t];
    s.xi = (1.0 - d) * old.xi + d * next.xi;
    return s;
}

ProducerStrategy mix(const ProducerStrategy& old, const ProducerStrategy& next, double d) {
    ProducerStrategy s = old;
    for (std::size_t t = 0; t < s.b.size(); ++t) {
        s.b[t] = (1.0 - d) * old.b[t] + d * next.b[t];
        s.q[t] = (1.0 - d) * old.q[t] + d * next.q[t];
    }
    s.b0 = (1.0 - d) * old.b0 + d * next.b0;
    s.K = (1.0 - d) * old.K + d * next.K;
    return s;
}

}  // namespace

StrategyProfile default_interior_profile(const MarketConfig& config) {
    StrategyProfile p;
    const double Omega = config.total_endowment();
    p.standard.resize(config.M);
    for (int h = 0; h < config.M; ++h) {
        const auto& u = config.standard_utility(h);
        auto& s = p.standard[h];
        s.b.assign(config.T, 0.0);
        s.omega_offer = config.omega[h];
        double total = u.total();
        double scale = 0.4 * config.omega[h];
        for (int t = 0; t < config.T; ++t)
            if (u.elec[t] > 0.0) s.b[t] = scale * u.elec[t] / total;
        s.xi = scale * u.numeraire / total + 0.1 * config.omega[h];
    }
    p.producer.resize(config.P);
    for (int j = 0; j < config.P; ++j) {
        const auto& u = config.producer_utility(j);
        auto& s = p.producer[j];
        s.b.assign(config.T, 0.0);
        s.q.assign(config.T, 0.0);
        double cap = config.K_bar;
        if (config.horizon == Horizon::LongRun) {
            s.K = config.K_bar;
            cap = s.K;
        }
        for (int t = 0; t < config.T; ++t) {
            s.q[t] = 0.5 * cap;
            if (u.elec[t] > 0.0) s.b[t] = 0.05 * Omega / (config.P * config.T);
        }
        s.b0 = 0.25 * Omega / config.P;
    }
    // production can outrun the numeraire purchases this profile funds;
    // shrink output until every producer's consumption is strictly interior
    for (int pass = 0; pass < 60; ++pass) {
        auto agg = compute_aggregates(p, config);
        auto alloc = allocate(p, agg, config);
        bool ok = true;
        for (int j = 0; j < config.P; ++j)
            if (!std::isfinite(agent_utility(config.M + j, alloc, p, config))) {
                ok = false;
                for (double& q : p.producer[j].q) q *= 0.5;
            }
        if (ok) break;
    }
    return p;
}

StrategyProfile normalize_nominal(StrategyProfile profile, double money_supply) {
    double B0 = 0.0;
    for (const auto& s : profile.standard) B0 += s.xi;
    for (const auto& s : profile.producer) B0 += s.b0;
    if (!(B0 > 0.0)) return profile;  // trivial profile: nothing to normalize
    const double k = money_supply / B0;
    for (auto& s : profile.standard) {
        for (double& v : s.b) v *= k;
        s.xi *= k;
    }
    for (auto& s : profile.producer) {
        for (double& v : s.b) v *= k;
        s.b0 *= k;
    }
    return profile;
}

EquilibriumResult solve_nash(const MarketConfig& config, std::optional<StrategyProfile> init,
                             const SolveOptions& opts) {
    config.validate();
    if (!(opts.damping > 0.0 && opts.damping <= 1.0))
        throw std::invalid_argument("damping must be in (0, 1]");

    StrategyProfile profile = init ? std::move(*init) : default_interior_profile(config);
    EquilibriumResult out;

    const bool started_trivial = profile_is_zero(profile);
    if (!started_trivial) {
        auto agg0 = compute_aggregates(profile, config);
        auto alloc0 = allocate(profile, agg0, config);
        for (int i = 0; i < config.num_agents(); ++i)
            if (!std::isfinite(agent_utility(i, alloc0, profile, config)))
                throw std::invalid_argument(
                    "non-finite utility at the initial profile; use a strictly interior "
                    "initialization");
    }

    double damping = opts.damping;
    int halvings = 0;
    StrategyProfile prev = profile, prev2 = profile;
    int iter = 0;
    bool converged = false;
    double change = kInf;
    for (; iter < opts.max_iter; ++iter) {
        prev2 = prev;
        prev = profile;
        if (opts.mode == SweepMode::GaussSeidel) {
            for (int h = 0; h < config.M; ++h) {
                auto agg = compute_aggregates(profile, config);
                auto br = standard_best_response(h, agg, config, opts.inner,
                                                  &profile.standard[h]);
                profile.standard[h] = mix(profile.standard[h], br.strategy, damping);
            }
            for (int j = 0; j < config.P; ++j) {
                auto agg = compute_aggregates(profile, config);
                auto br = producer_best_response(j, agg, config, opts.inner,
                                                  &profile.producer[j]);
                profile.producer[j] = mix(profile.producer[j], br.strategy, damping);
            }
        } else {
            auto agg = compute_aggregates(prev, config);
            StrategyProfile next = prev;
            for (int h = 0; h < config.M; ++h)
                next.standard[h] =
                    mix(prev.standard[h],
                        standard_best_response(h, agg, config, opts.inner, &prev.standard[h])
                            .strategy,
                        damping);
            for (int j = 0; j < config.P; ++j)
                next.producer[j] =
                    mix(prev.producer[j],
                        producer_best_response(j, agg, config, opts.inner, &prev.producer[j])
                            .strategy,
                        damping);
            profile = std::move(next);
        }
        change = profile_distance(profile, prev);
        if (change <= opts.tol) {
            converged = true;
            ++iter;
            break;
        }
        // period-2 cycle: the iterate returns to where it was two sweeps ago
        if (iter >= 2 && profile_distance(profile, prev2) < 1e-3 * change && halvings < 4) {
            damping *= 0.5;
            ++halvings;
        }
    }

    out.iterations = iter;
    out.max_strategy_change = change;
    out.trivial = profile_is_zero(profile);
    out.damping_used = damping;

    if (!out.trivial) profile = normalize_nominal(std::move(profile), config.money_supply);
    auto agg = compute_aggregates(profile, config);
    out.prices = prices(agg);
    out.allocations = allocate(profile, agg, config);
    out.foc_reports.reserve(config.num_agents());
    for (int h = 0; h < config.M; ++h)
        out.foc_reports.push_back(foc_residual_standard(h, profile.standard[h], agg, config));
    for (int j = 0; j < config.P; ++j)
        out.foc_reports.push_back(foc_residual_producer(j, profile.producer[j], agg, config));
    out.payoffs.reserve(config.num_agents());
    for (int i = 0; i < config.num_agents(); ++i)
        out.payoffs.push_back(agent_utility(i, out.allocations, profile, config));

    if (converged && !out.trivial)
        for (const auto& rep : out.foc_reports)
            if (rep.max_residual > opts.foc_tol) converged = false;
    out.converged = converged;
    out.profile = std::move(profile);
    return out;
}

MarketConfig replicate_economy(const MarketConfig& config, int n) {
    if (n < 1) throw std::invalid_argument("replication count must be >= 1");
    MarketConfig cfg = config;
    cfg.M = config.M * n;
    cfg.P = config.P * n;
    cfg.omega.clear();
    cfg.utility.clear();
    for (int k = 0; k < n; ++k)
        for (int h = 0; h < config.M; ++h) {
            cfg.omega.push_back(config.omega[h]);
            cfg.utility.push_back(config.utility[h]);
        }
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < config.P; ++j) cfg.utility.push_back(config.utility[config.M + j]);
    return cfg;
}

CompetitiveBenchmark competitive_benchmark(const MarketConfig& config) {
    config.validate();
    if (config.c > 1.0)
        throw std::invalid_argument("increasing returns unsupported in Walrasian mode");
    const int T = config.T, M = config.M, P = config.P;
    const double theta = config.theta, c = config.c;
    const double cap = config.K_bar;  // short-run capacity per producer
    const double Omega = config.total_endowment();

    auto share = [&](int i, int t) {
        const auto& u = config.utility[i];
        return u.elec[t] / u.total();
    };
    auto share0 = [&](int i) {
        const auto& u = config.utility[i];
        return u.numeraire / u.total();
    };

    // supply and profit of one producer at prices p (c < 1 interior, c = 1
    // bang-bang with the tie handled by rationing below)
    auto supply_at = [&](double p) {
        if (c < 1.0) {
            // p = marginal input cost  =>  q = theta * (c*theta*p)^(c/(1-c))
            double q = theta * std::pow(std::max(0.0, c * theta * p), c / (1.0 - c));
            return std::min(q, cap);
        }
        return p > 1.0 / theta ? cap : 0.0;
    };
    auto input_of = [&](double q) { return q > 0.0 ? std::pow(q / theta, 1.0 / c) : 0.0; };

    std::vector<double> p(T, 1.0 / theta);
    std::vector<double> q(T, 0.0);     // per producer
    std::vector<double> D(T, 0.0);     // aggregate electricity demand
    double profit = 0.0;               // per producer

    auto compute_demand = [&](const std::vector<double>& pr, double pi) {
        for (int t = 0; t < T; ++t) {
            double d = 0.0;
            for (int h = 0; h < M; ++h) d += share(h, t) * config.omega[h] / pr[t];
            for (int j = 0; j < P; ++j) d += share(M + j, t) * pi / pr[t];
            D[t] = d;
        }
    };

    const double mc0 = 1.0 / theta;  // marginal cost at c = 1
    if (c == 1.0) {
        // phase 1: p = mc, zero profit; ration supply to demand if capacity slack
        compute_demand(p, 0.0);
        bool slack = true;
        for (int t = 0; t < T; ++t)
            if (D[t] > P * cap * (1.0 - 1e-12)) slack = false;
        if (slack) {
            for (int t = 0; t < T; ++t) q[t] = D[t] / P;
            profit = 0.0;
        } else {
            // capacity binds on at least one post: supply is fixed at P*cap
            // there; iterate the profit fixed point
            for (int it = 0; it < 10000; ++it) {
                compute_demand(p, profit);
                std::vector<double> pn = p;
                for (int t = 0; t < T; ++t) {
                    double expenditure = p[t] * D[t];
                    double candidate = expenditure / (P * cap);
                    pn[t] = std::max(mc0, candidate);
                }
                double moved = 0.0;
                for (int t = 0; t < T; ++t) moved = std::max(moved, std::fabs(pn[t] - p[t]));
                p = pn;
                for (int t = 0; t < T; ++t) q[t] = p[t] > mc0 * (1.0 + 1e-12) ? cap : 0.0;
                double pi = 0.0;
                for (int t = 0; t < T; ++t) pi += (p[t] - mc0) * q[t];
                profit = pi;
                if (moved < 1e-14) break;
            }
            // posts still at mc: ration
            compute_demand(p, profit);
            for (int t = 0; t < T; ++t)
                if (!(p[t] > mc0 * (1.0 + 1e-12))) q[t] = std::min(D[t] / P, cap);
        }
    } else {
        // damped tatonnement on log prices; profits recomputed each pass
        for (int it = 0; it < 200000; ++it) {
            for (int t = 0; t < T; ++t) q[t] = supply_at(p[t]);
            double pi = 0.0;
            for (int t = 0; t < T; ++t) pi += p[t] * q[t] - input_of(q[t]);
            profit = pi;
            compute_demand(p, profit);
            double worst = 0.0;
            for (int t = 0; t < T; ++t) {
                double excess = D[t] - P * q[t];
                worst = std::max(worst, std::fabs(excess));
                double scale = std::max(D[t], P * q[t]) + 1e-12;
                p[t] *= std::exp(0.2 * excess / scale);
            }
            if (worst < 1e-12) break;
        }
        for (int t = 0; t < T; ++t) q[t] = supply_at(p[t]);
        profit = 0.0;
        for (int t = 0; t < T; ++t) profit += p[t] * q[t] - input_of(q[t]);
    }

    CompetitiveBenchmark bench;
    bench.p = p;
    compute_demand(p, profit);
    bench.x.assign(M + P, std::vector<double>(T, 0.0));
    bench.x0.assign(M + P, 0.0);
    bench.q.assign(P, q);
    bench.profit.assign(P, profit);
    for (int h = 0; h < M; ++h) {
        for (int t = 0; t < T; ++t) bench.x[h][t] = share(h, t) * config.omega[h] / p[t];
        bench.x0[h] = share0(h) * config.omega[h];
    }
    for (int j = 0; j < P; ++j) {
        for (int t = 0; t < T; ++t) bench.x[M + j][t] = share(M + j, t) * profit / p[t];
        bench.x0[M + j] = share0(M + j) * profit;
    }

    double resid = 0.0;
    for (int t = 0; t < T; ++t) {
        double excess = -P * q[t];
        for (int i = 0; i < M + P; ++i) excess += bench.x[i][t];
        resid = std::max(resid, std::fabs(excess));
    }
    double num_excess = -Omega;
    for (int i = 0; i < M + P; ++i) num_excess += bench.x0[i];
    for (int t = 0; t < T; ++t) num_excess += P * input_of(q[t]);
    resid = std::max(resid, std::fabs(num_excess));
    bench.excess_demand_residual = resid;
    return bench;
}

std::vector<ReplicationRow> convergence_experiment(const MarketConfig& config,
                                                   const std::vector<int>& replications,
                                                   const SolveOptions& opts) {
    auto bench = competitive_benchmark(config);  // per-capita, replication invariant
    std::vector<ReplicationRow> rows;
    // warm-start each economy from the previous (smaller) one's per-capita
    // play, tiled; keeps the sweep near the interior equilibrium instead of
    // overshooting into an unprofitable-production region
    std::optional<StrategyProfile> base;
    for (int n : replications) {
        ReplicationRow row;
        row.n = n;
        row.competitive_price = bench.p;
        auto cfg = replicate_economy(config, n);
        std::optional<StrategyProfile> init;
        if (base) {
            StrategyProfile p;
            for (int k = 0; k < n; ++k)
                p.standard.insert(p.standard.end(), base->standard.begin(),
                                  base->standard.end());
            for (int k = 0; k < n; ++k)
                p.producer.insert(p.producer.end(), base->producer.begin(),
                                  base->producer.end());
            init = std::move(p);
        }
        auto eq = solve_nash(cfg, std::move(init), opts);
        if (eq.converged && !eq.trivial) {
            StrategyProfile b;
            b.standard.assign(eq.profile.standard.begin(),
                              eq.profile.standard.begin() + config.M);
            b.producer.assign(eq.profile.producer.begin(),
                              eq.profile.producer.begin() + config.P);
            base = std::move(b);
        }
        row.converged = eq.converged && !eq.trivial;
        row.nash_price.assign(config.T, 0.0);
        double gap = 0.0;
        for (int t = 0; t < config.T; ++t) {
            if (eq.prices.defined_mask[t] && eq.prices.p0_defined)
                row.nash_price[t] = eq.prices.p[t] / eq.prices.p0;
            gap = std::max(gap, std::fabs(row.nash_price[t] - bench.p[t]));
        }
        row.gap = gap;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace emg
