#include "emg/market.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace emg {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double UtilityWeights::total() const {
    double s = numeraire;
    for (double a : elec) s += a;
    return s;
}

double MarketConfig::total_endowment() const {
    double s = 0.0;
    for (double w : omega) s += w;
    return s;
}

void MarketConfig::validate() const {
    if (T < 1) throw std::invalid_argument("T must be >= 1");
    if (M < 0 || P < 0) throw std::invalid_argument("M and P must be nonnegative");
    if (!(theta > 0.0)) throw std::invalid_argument("theta must be > 0");
    if (!(c > 0.0)) throw std::invalid_argument("c must be > 0");
    if (!(K_bar > 0.0)) throw std::invalid_argument("K_bar must be > 0");
    if (rho < 0.0) throw std::invalid_argument("rho must be >= 0");
    if (horizon == Horizon::LongRun && !(rho > 0.0))
        throw std::invalid_argument("rho must be > 0 in the long run");
    if (!(money_supply > 0.0)) throw std::invalid_argument("money_supply must be > 0");
    if (static_cast<int>(omega.size()) != M)
        throw std::invalid_argument("omega must have one entry per standard agent");
    for (int h = 0; h < M; ++h)
        if (omega[h] < 0.0)
            throw std::invalid_argument("omega[" + std::to_string(h) + "] must be >= 0");
    if (!(total_endowment() > 0.0))
        throw std::invalid_argument("total endowment Omega must be > 0");
    if (static_cast<int>(utility.size()) != M + P)
        throw std::invalid_argument("utility must have one entry per agent");
    for (int i = 0; i < M + P; ++i) {
        const auto& u = utility[i];
        if (static_cast<int>(u.elec.size()) != T)
            throw std::invalid_argument("utility[" + std::to_string(i) +
                                        "]: electricity weights must have T entries");
        if (u.numeraire < 0.0)
            throw std::invalid_argument("utility[" + std::to_string(i) +
                                        "]: numeraire weight must be >= 0");
        bool any_elec = false;
        for (double a : u.elec) {
            if (a < 0.0)
                throw std::invalid_argument("utility[" + std::to_string(i) +
                                            "]: weights must be >= 0");
            if (a > 0.0) any_elec = true;
        }
        if (!any_elec)
            throw std::invalid_argument("utility[" + std::to_string(i) +
                                        "]: needs a positive electricity weight");
    }
}

double StandardStrategy::max_bid() const {
    double m = xi;
    for (double v : b) m = std::max(m, v);
    return m;
}

double ProducerStrategy::max_bid() const {
    double m = b0;
    for (double v : b) m = std::max(m, v);
    return m;
}

double ClearingResiduals::max_abs() const {
    double m = std::fabs(numeraire);
    for (double r : electricity) m = std::max(m, std::fabs(r));
    return m;
}

Aggregates compute_aggregates(const StrategyProfile& profile, const MarketConfig& config) {
    const int T = config.T, M = config.M, P = config.P;
    if (static_cast<int>(profile.standard.size()) != M)
        throw std::invalid_argument("profile has " + std::to_string(profile.standard.size()) +
                                    " standard strategies, config expects " + std::to_string(M));
    if (static_cast<int>(profile.producer.size()) != P)
        throw std::invalid_argument("profile has " + std::to_string(profile.producer.size()) +
                                    " producer strategies, config expects " + std::to_string(P));
    for (int h = 0; h < M; ++h)
        if (static_cast<int>(profile.standard[h].b.size()) != T)
            throw std::invalid_argument("standard agent " + std::to_string(h) +
                                        ": bid vector length != T");
    for (int j = 0; j < P; ++j) {
        const auto& s = profile.producer[j];
        if (static_cast<int>(s.b.size()) != T || static_cast<int>(s.q.size()) != T)
            throw std::invalid_argument("producer " + std::to_string(j) +
                                        ": bid/offer vector length != T");
    }

    Aggregates agg;
    agg.B.assign(T, 0.0);
    agg.Q.assign(T, 0.0);
    for (int t = 0; t < T; ++t) {
        for (const auto& s : profile.standard) agg.B[t] += s.b[t];
        for (const auto& s : profile.producer) {
            agg.B[t] += s.b[t];
            agg.Q[t] += s.q[t];
        }
    }
    for (const auto& s : profile.standard) {
        agg.B0 += s.xi;
        agg.Omega += s.omega_offer;
    }
    for (const auto& s : profile.producer) agg.B0 += s.b0;

    agg.B_minus.assign(M + P, std::vector<double>(T, 0.0));
    agg.B0_minus.assign(M + P, 0.0);
    agg.Q_minus.assign(P, std::vector<double>(T, 0.0));
    agg.Omega_minus.assign(M, 0.0);
    for (int h = 0; h < M; ++h) {
        const auto& s = profile.standard[h];
        for (int t = 0; t < T; ++t) agg.B_minus[h][t] = agg.B[t] - s.b[t];
        agg.B0_minus[h] = agg.B0 - s.xi;
        agg.Omega_minus[h] = agg.Omega - s.omega_offer;
    }
    for (int j = 0; j < P; ++j) {
        const auto& s = profile.producer[j];
        for (int t = 0; t < T; ++t) {
            agg.B_minus[M + j][t] = agg.B[t] - s.b[t];
            agg.Q_minus[j][t] = agg.Q[t] - s.q[t];
        }
        agg.B0_minus[M + j] = agg.B0 - s.b0;
    }
    return agg;
}

PriceVector prices(const Aggregates& agg) {
    const int T = static_cast<int>(agg.B.size());
    PriceVector pv;
    pv.p.assign(T, 0.0);
    pv.defined_mask.assign(T, false);
    for (int t = 0; t < T; ++t) {
        if (agg.B[t] > 0.0 && agg.Q[t] > 0.0) {
            pv.p[t] = agg.B[t] / agg.Q[t];
            pv.defined_mask[t] = true;
        }
    }
    if (agg.B0 > 0.0 && agg.Omega > 0.0) {
        pv.p0 = agg.B0 / agg.Omega;
        pv.p0_defined = true;
    }
    return pv;
}

std::vector<double> input_requirement(std::span<const double> q, const MarketConfig& config) {
    std::vector<double> phi(q.size(), 0.0);
    for (std::size_t t = 0; t < q.size(); ++t)
        if (q[t] > 0.0) phi[t] = std::pow(q[t] / config.theta, 1.0 / config.c);
    return phi;
}

double required_input_total(const ProducerStrategy& s, const MarketConfig& config) {
    double total = 0.0;
    for (double phi : input_requirement(s.q, config)) total += phi;
    if (config.horizon == Horizon::LongRun) total += config.rho * s.K;
    return total;
}

AllocationSet allocate(const StrategyProfile& profile, const Aggregates& agg,
                       const MarketConfig& config) {
    const int T = config.T, M = config.M, P = config.P;
    AllocationSet a;
    a.x.assign(M + P, std::vector<double>(T, 0.0));
    a.x0.assign(M + P, 0.0);
    a.phi.assign(P, std::vector<double>(T, 0.0));
    a.producer_infeasible.assign(P, false);

    auto post_active = [&](int t) { return agg.B[t] > 0.0 && agg.Q[t] > 0.0; };
    for (int t = 0; t < T; ++t) {
        if (!post_active(t)) continue;  // dead post: no trade, bids returned
        for (int h = 0; h < M; ++h)
            a.x[h][t] = profile.standard[h].b[t] / agg.B[t] * agg.Q[t];
        for (int j = 0; j < P; ++j)
            a.x[M + j][t] = profile.producer[j].b[t] / agg.B[t] * agg.Q[t];
    }
    const bool num_active = agg.B0 > 0.0 && agg.Omega > 0.0;
    for (int h = 0; h < M; ++h)
        if (num_active) a.x0[h] = profile.standard[h].xi / agg.B0 * agg.Omega;
    for (int j = 0; j < P; ++j) {
        const auto& s = profile.producer[j];
        a.phi[j] = input_requirement(s.q, config);
        double purchases = num_active ? s.b0 / agg.B0 * agg.Omega : 0.0;
        double phi_total = 0.0;
        for (double v : a.phi[j]) phi_total += v;
        a.x0[M + j] = purchases - phi_total;
        if (a.x0[M + j] < 0.0) a.producer_infeasible[j] = true;
    }
    return a;
}

BudgetSlack check_budget_standard(int h, const StandardStrategy& s, const Aggregates& agg) {
    if (!(agg.Omega > 0.0)) throw std::invalid_argument("degenerate economy: Omega = 0");
    double bid_sum = 0.0;
    for (double v : s.b) bid_sum += v;
    BudgetSlack out;
    // simplified: own bids isolated on the left
    out.slack = agg.B0_minus[h] / agg.Omega * s.omega_offer - bid_sum -
                agg.Omega_minus[h] / agg.Omega * s.xi;
    // raw: wealth share of the full numeraire bid pool
    out.raw = agg.B0 / agg.Omega * s.omega_offer - bid_sum - s.xi;
    return out;
}

BudgetSlack check_budget_producer(int j, const ProducerStrategy& s, const Aggregates& agg) {
    const int T = static_cast<int>(agg.B.size());
    const int M = static_cast<int>(agg.B0_minus.size()) - static_cast<int>(agg.Q_minus.size());
    BudgetSlack out;
    double raw_rev = 0.0, raw_bids = 0.0, s_rev = 0.0, s_bids = 0.0;
    for (int t = 0; t < T; ++t) {
        if (agg.Q[t] > 0.0) {
            raw_rev += agg.B[t] / agg.Q[t] * s.q[t];
            raw_bids += s.b[t];
            s_rev += agg.B_minus[M + j][t] / agg.Q[t] * s.q[t];
            s_bids += agg.Q_minus[j][t] / agg.Q[t] * s.b[t];
        }
        // Q^t = 0: dead post, no revenue and no net bid cost
    }
    out.raw = raw_rev - raw_bids - s.b0;
    out.slack = s_rev - s_bids - s.b0;
    return out;
}

FeasibilityReport check_production_feasible(const ProducerStrategy& s,
                                            const MarketConfig& config) {
    FeasibilityReport rep;
    const double cap = config.horizon == Horizon::ShortRun ? config.K_bar : s.K;
    for (std::size_t t = 0; t < s.q.size(); ++t) {
        if (s.q[t] < 0.0) {
            rep.feasible = false;
            rep.violations.push_back({"q[" + std::to_string(t) + "] < 0", s.q[t]});
        }
        if (s.q[t] > cap) {
            rep.feasible = false;
            rep.violations.push_back(
                {"q[" + std::to_string(t) + "] exceeds capacity", cap - s.q[t]});
        }
    }
    if (config.horizon == Horizon::LongRun && s.K < 0.0) {
        rep.feasible = false;
        rep.violations.push_back({"K < 0", s.K});
    }
    rep.required_input = required_input_total(s, config);
    return rep;
}

ClearingResiduals market_clearing_residuals(const AllocationSet& alloc, const Aggregates& agg) {
    const int T = static_cast<int>(agg.B.size());
    const int P = static_cast<int>(alloc.phi.size());
    const int N = static_cast<int>(alloc.x.size());
    const int M = N - P;
    ClearingResiduals res;
    res.electricity.assign(T, 0.0);
    for (int t = 0; t < T; ++t) {
        if (!(agg.B[t] > 0.0 && agg.Q[t] > 0.0)) continue;  // no trade, residual 0
        double sum = 0.0;
        for (int i = 0; i < N; ++i) sum += alloc.x[i][t];
        res.electricity[t] = sum - agg.Q[t];
    }
    if (agg.B0 > 0.0 && agg.Omega > 0.0) {
        double sum = 0.0;
        for (int h = 0; h < M; ++h) sum += alloc.x0[h];
        for (int j = 0; j < P; ++j) {
            sum += alloc.x0[M + j];
            for (int t = 0; t < T; ++t) sum += alloc.phi[j][t];
        }
        res.numeraire = sum - agg.Omega;
    }
    return res;
}

double log_utility(const UtilityWeights& w, std::span<const double> x_elec, double x0) {
    double u = 0.0;
    for (std::size_t t = 0; t < x_elec.size(); ++t) {
        const double a = w.elec[t];
        if (a == 0.0) continue;
        if (!(x_elec[t] > 0.0)) return -kInf;
        u += a * std::log(x_elec[t]);
    }
    if (w.numeraire > 0.0) {
        if (!(x0 > 0.0)) return -kInf;
        u += w.numeraire * std::log(x0);
    }
    return u;
}

double agent_utility(int i, const AllocationSet& alloc, const StrategyProfile& profile,
                     const MarketConfig& config) {
    double x0 = alloc.x0[i];
    if (i >= config.M && config.horizon == Horizon::LongRun)
        x0 -= config.rho * profile.producer[i - config.M].K;
    return log_utility(config.utility[i], alloc.x[i], x0);
}

}  // namespace emg
