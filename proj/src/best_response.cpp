#include "emg/best_response.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace emg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dphi_dq(double q, const MarketConfig& cfg) {
    // phi(q) = (q/theta)^(1/c)
    if (q <= 0.0) {
        if (cfg.c < 1.0) return 0.0;
        if (cfg.c == 1.0) return 1.0 / cfg.theta;
        return kInf;  // c > 1: marginal input diverges at q = 0
    }
    return 1.0 / (cfg.c * cfg.theta) * std::pow(q / cfg.theta, (1.0 - cfg.c) / cfg.c);
}

// The pre-expansion form: derivative of phi(q) = (q/theta)^(1/c) taken as
// d/dq q^(1/c) * theta^(-1/c). Algebraically identical to dphi_dq; kept as
// a separate computation route for the consistency check.
double dphi_dq_direct(double q, const MarketConfig& cfg) {
    if (q <= 0.0) return dphi_dq(q, cfg);
    return (1.0 / cfg.c) * std::pow(q, 1.0 / cfg.c - 1.0) * std::pow(cfg.theta, -1.0 / cfg.c);
}

// Projection of y onto { z >= 0, sum_i w_i z_i <= budget, z_i = 0 for pinned i }.
std::vector<double> project_budget_simplex(std::vector<double> y, const std::vector<double>& w,
                                           const std::vector<bool>& pinned, double budget) {
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i)
        if (pinned[i] || y[i] < 0.0) y[i] = pinned[i] ? 0.0 : std::max(0.0, y[i]);
    double spend = 0.0;
    for (std::size_t i = 0; i < n; ++i) spend += w[i] * y[i];
    if (spend <= budget) return y;
    // find tau >= 0 with sum w_i max(0, y_i - tau w_i) = budget
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (!pinned[i] && w[i] > 0.0) hi = std::max(hi, y[i] / w[i]);
    for (int it = 0; it < 200; ++it) {
        double tau = 0.5 * (lo + hi);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (!pinned[i]) s += w[i] * std::max(0.0, y[i] - tau * w[i]);
        (s > budget ? lo : hi) = tau;
    }
    double tau = 0.5 * (lo + hi);
    std::vector<double> z(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (!pinned[i]) z[i] = std::max(0.0, y[i] - tau * w[i]);
    return z;
}

// Projected gradient ascent with Armijo backtracking on a box/simplex
// feasible set given by a projection operator.
struct PgResult {
    std::vector<double> z;
    double value = -kInf;
    SolverTrace trace;
};

PgResult projected_gradient_ascent(
    std::vector<double> z, const std::function<double(const std::vector<double>&)>& f,
    const std::function<std::vector<double>(const std::vector<double>&)>& grad,
    const std::function<std::vector<double>(std::vector<double>)>& project,
    const std::function<double(const std::vector<double>&, const std::vector<double>&)>& kkt,
    const SolverOptions& opts) {
    PgResult res;
    z = project(std::move(z));
    double fz = f(z);
    double step = 1.0;
    int it = 0;
    std::string term = "max_iter";
    std::vector<double> z_prev, g_prev;
    std::vector<double> recent_f{fz};  // nonmonotone reference window
    for (; it < opts.max_iter; ++it) {
        auto g = grad(z);
        if (kkt(z, g) <= opts.kkt_tol) {
            term = "kkt";
            break;
        }
        // Barzilai-Borwein spectral step; fall back to the previous step on
        // the first iteration or degenerate curvature.
        if (!z_prev.empty()) {
            double ss = 0.0, sy = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i) {
                double s = z[i] - z_prev[i];
                double y = g_prev[i] - g[i];
                ss += s * s;
                sy += s * y;
            }
            if (sy > 1e-300 && ss > 0.0) step = std::min(1e10, std::max(1e-12, ss / sy));
        }
        z_prev = z;
        g_prev = g;
        double f_ref = *std::max_element(recent_f.begin(), recent_f.end());
        bool accepted = false;
        for (int bt = 0; bt < 80; ++bt) {
            std::vector<double> y(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) y[i] = z[i] + step * g[i];
            y = project(std::move(y));
            double fy = f(y);
            double dir = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i) dir += g[i] * (y[i] - z[i]);
            if (std::isfinite(fy) && fy >= f_ref + 1e-4 * dir) {
                z = std::move(y);
                fz = fy;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            term = "stalled";
            break;
        }
        recent_f.push_back(fz);
        if (recent_f.size() > 10) recent_f.erase(recent_f.begin());
    }
    res.z = std::move(z);
    res.value = fz;
    res.trace.iterations = it;
    res.trace.final_step = step;
    res.trace.termination = term;
    return res;
}

double least_squares_lambda(const std::vector<std::pair<double, double>>& ag) {
    double num = 0.0, den = 0.0;
    for (auto [a, g] : ag) {
        num += a * g;
        den += g * g;
    }
    return den > 0.0 ? num / den : 0.0;
}

bool is_zero_strategy(const StandardStrategy& s) {
    if (s.xi != 0.0) return false;
    for (double v : s.b)
        if (v != 0.0) return false;
    return true;
}

}  // namespace

double standard_payoff(int h, const StandardStrategy& s, const Aggregates& agg,
                       const MarketConfig& config) {
    const int T = config.T;
    std::vector<double> x(T, 0.0);
    for (int t = 0; t < T; ++t) {
        double B = agg.B_minus[h][t] + s.b[t];
        if (B > 0.0 && agg.Q[t] > 0.0) x[t] = s.b[t] / B * agg.Q[t];
    }
    double B0 = agg.B0_minus[h] + s.xi;
    double x0 = (B0 > 0.0 && agg.Omega > 0.0) ? s.xi / B0 * agg.Omega : 0.0;
    return log_utility(config.utility[h], x, x0);
}

double producer_payoff(int j, const ProducerStrategy& s, const Aggregates& agg,
                       const MarketConfig& config) {
    const int T = config.T, i = config.M + j;
    std::vector<double> x(T, 0.0);
    for (int t = 0; t < T; ++t) {
        double B = agg.B_minus[i][t] + s.b[t];
        double Q = agg.Q_minus[j][t] + s.q[t];
        if (B > 0.0 && Q > 0.0) x[t] = s.b[t] / B * Q;
    }
    double B0 = agg.B0_minus[i] + s.b0;
    double purchases = (B0 > 0.0 && agg.Omega > 0.0) ? s.b0 / B0 * agg.Omega : 0.0;
    double x0 = purchases - required_input_total(s, config);
    if (x0 < 0.0) return -kInf;  // consumption cannot go negative
    return log_utility(config.utility[i], x, x0);
}

StandardBestResponse standard_best_response(int h, const Aggregates& agg,
                                            const MarketConfig& config,
                                            const SolverOptions& opts,
                                            const StandardStrategy* warm) {
    const int T = config.T;
    const auto& u = config.utility[h];
    StandardBestResponse out;
    out.strategy.b.assign(T, 0.0);
    out.strategy.omega_offer = config.omega[h];
    const double omega_h = config.omega[h];

    if (!(agg.Omega > 0.0)) throw std::invalid_argument("degenerate economy: Omega = 0");
    const double budget = agg.B0_minus[h] / agg.Omega * omega_h;
    if (omega_h <= 0.0 || budget <= 0.0) {
        out.flag = omega_h <= 0.0 ? BrFlag::ZeroEndowment : BrFlag::NoMarket;
        out.payoff = standard_payoff(h, out.strategy, agg, config);
        out.trace.termination = "degenerate";
        out.foc = foc_residual_standard(h, out.strategy, agg, config);
        return out;
    }

    // variables: b^1..b^T then xi; weight of xi in the budget is Omega_-h/Omega
    const int n = T + 1;
    std::vector<double> w(n, 1.0);
    w[T] = agg.Omega_minus[h] / agg.Omega;
    std::vector<bool> pinned(n, false);
    for (int t = 0; t < T; ++t)
        pinned[t] = u.elec[t] == 0.0 || !(agg.B_minus[h][t] > 0.0) || !(agg.Q[t] > 0.0);
    pinned[T] = u.numeraire == 0.0 || !(agg.B0_minus[h] > 0.0) || !(w[T] > 0.0);

    double active_weight = 0.0;
    for (int t = 0; t < T; ++t)
        if (!pinned[t]) active_weight += u.elec[t];
    if (!pinned[T]) active_weight += u.numeraire;
    if (active_weight == 0.0) {
        out.flag = BrFlag::NoMarket;
        out.payoff = standard_payoff(h, out.strategy, agg, config);
        out.trace.termination = "degenerate";
        out.foc = foc_residual_standard(h, out.strategy, agg, config);
        return out;
    }

    auto value = [&](const std::vector<double>& z) {
        double f = 0.0;
        for (int t = 0; t < T; ++t) {
            if (pinned[t] || u.elec[t] == 0.0) continue;
            if (!(z[t] > 0.0)) return -kInf;
            f += u.elec[t] * (std::log(z[t]) - std::log(agg.B_minus[h][t] + z[t]));
        }
        if (!pinned[T] && u.numeraire > 0.0) {
            if (!(z[T] > 0.0)) return -kInf;
            f += u.numeraire * (std::log(z[T]) - std::log(agg.B0_minus[h] + z[T]));
        }
        return f;
    };
    auto gradient = [&](const std::vector<double>& z) {
        std::vector<double> g(n, 0.0);
        for (int t = 0; t < T; ++t)
            if (!pinned[t])
                g[t] = u.elec[t] * agg.B_minus[h][t] / (z[t] * (agg.B_minus[h][t] + z[t]));
        if (!pinned[T])
            g[T] = u.numeraire * agg.B0_minus[h] / (z[T] * (agg.B0_minus[h] + z[T]));
        return g;
    };
    auto project = [&](std::vector<double> y) {
        return project_budget_simplex(std::move(y), w, pinned, budget);
    };
    auto kkt = [&](const std::vector<double>& z, const std::vector<double>& g) {
        double num = 0.0, den = 0.0;
        for (int i = 0; i < n; ++i)
            if (!pinned[i] && z[i] > 0.0) {
                num += g[i] * w[i];
                den += w[i] * w[i];
            }
        double lam = den > 0.0 ? num / den : 0.0;
        double r = 0.0;
        for (int i = 0; i < n; ++i) {
            if (pinned[i]) continue;
            r = std::max(r, z[i] > 0.0 ? std::fabs(g[i] - lam * w[i])
                                       : std::max(0.0, g[i] - lam * w[i]));
        }
        return r;
    };

    std::vector<double> z0(n, 0.0);
    for (int t = 0; t < T; ++t)
        if (!pinned[t]) z0[t] = budget * (u.elec[t] / active_weight) / w[t];
    if (!pinned[T]) z0[T] = budget * (u.numeraire / active_weight) / w[T];
    if (warm) {
        // the reduced objective is concave, so any interior start reaches the
        // same optimum; a warm start just gets there in fewer iterations
        std::vector<double> zw(n, 0.0);
        for (int t = 0; t < T; ++t) zw[t] = warm->b[t];
        zw[T] = warm->xi;
        zw = project(std::move(zw));
        if (std::isfinite(value(zw))) z0 = std::move(zw);
    }

    auto res = projected_gradient_ascent(std::move(z0), value, gradient, project, kkt, opts);
    for (int t = 0; t < T; ++t) out.strategy.b[t] = res.z[t];
    out.strategy.xi = res.z[T];
    out.trace = res.trace;
    out.payoff = standard_payoff(h, out.strategy, agg, config);
    out.foc = foc_residual_standard(h, out.strategy, agg, config);
    return out;
}

namespace {

// Reduced producer objective over z = (b^1..b^T, q^1..q^T [, K]) with the
// numeraire bid b0 set to the budget residual (spending everything is
// weakly optimal: unspent bytecoins have no value).
struct ProducerProblem {
    int j, T;
    const Aggregates& agg;
    const MarketConfig& cfg;
    bool long_run;
    double K_max = 0.0;
    std::vector<bool> b_pinned;

    int dim() const { return 2 * T + (long_run ? 1 : 0); }
    double cap(const std::vector<double>& z) const { return long_run ? z[2 * T] : cfg.K_bar; }

    ProducerStrategy to_strategy(const std::vector<double>& z) const {
        ProducerStrategy s;
        s.b.assign(z.begin(), z.begin() + T);
        s.q.assign(z.begin() + T, z.begin() + 2 * T);
        s.K = long_run ? z[2 * T] : 0.0;
        const int i = cfg.M + j;
        double revenue = 0.0, bid_cost = 0.0;
        for (int t = 0; t < T; ++t) {
            double Q = agg.Q_minus[j][t] + s.q[t];
            if (Q > 0.0) {
                revenue += agg.B_minus[i][t] / Q * s.q[t];
                bid_cost += agg.Q_minus[j][t] / Q * s.b[t];
            }
        }
        s.b0 = revenue - bid_cost;
        return s;
    }

    double value(const std::vector<double>& z) const {
        ProducerStrategy s = to_strategy(z);
        if (s.b0 < 0.0) return -kInf;
        double cp = cap(z);
        for (int t = 0; t < T; ++t)
            if (s.q[t] > cp * (1.0 + 1e-12)) return -kInf;
        return producer_payoff(j, s, agg, cfg);
    }

    std::vector<double> gradient(const std::vector<double>& z) const {
        const int i = cfg.M + j;
        const auto& u = cfg.utility[i];
        ProducerStrategy s = to_strategy(z);
        double B0 = agg.B0_minus[i] + s.b0;
        double purchases = (B0 > 0.0 && agg.Omega > 0.0) ? s.b0 / B0 * agg.Omega : 0.0;
        double x0 = purchases - required_input_total(s, cfg);
        // d purchases / d b0 at fixed opponents
        double dpur = B0 > 0.0 ? agg.Omega * agg.B0_minus[i] / (B0 * B0) : 0.0;
        double u0 = u.numeraire > 0.0 && x0 > 0.0 ? u.numeraire / x0 : 0.0;
        std::vector<double> g(dim(), 0.0);
        for (int t = 0; t < T; ++t) {
            double Bm = agg.B_minus[i][t], Qm = agg.Q_minus[j][t];
            double B = Bm + s.b[t], Q = Qm + s.q[t];
            if (!b_pinned[t] && s.b[t] > 0.0 && B > 0.0 && Q > 0.0)
                g[t] = u.elec[t] * Bm / (s.b[t] * B) - u0 * dpur * Qm / Q;
            if (Q > 0.0) {
                double db0_dq = Qm * B / (Q * Q);
                g[T + t] = (s.b[t] > 0.0 && B > 0.0 ? u.elec[t] / Q : 0.0) +
                           u0 * (dpur * db0_dq - dphi_dq(s.q[t], cfg));
            }
        }
        if (long_run) g[2 * T] = -u0 * cfg.rho;
        return g;
    }

    std::vector<double> project(std::vector<double> z) const {
        for (int t = 0; t < T; ++t) z[t] = b_pinned[t] ? 0.0 : std::max(0.0, z[t]);
        if (long_run) z[2 * T] = std::clamp(z[2 * T], 0.0, K_max);
        double cp = cap(z);
        for (int t = 0; t < T; ++t) z[T + t] = std::clamp(z[T + t], 0.0, cp);
        return z;
    }

    // Projected-gradient optimality measure over the box.
    double kkt(const std::vector<double>& z, const std::vector<double>& g) const {
        double cp = cap(z);
        double r = 0.0;
        for (int t = 0; t < T; ++t) {
            if (!b_pinned[t])
                r = std::max(r, z[t] > 0.0 ? std::fabs(g[t]) : std::max(0.0, g[t]));
            double gq = g[T + t];
            if (z[T + t] <= 0.0)
                r = std::max(r, std::max(0.0, gq));
            else if (z[T + t] >= cp * (1.0 - 1e-12))
                r = std::max(r, std::max(0.0, -gq));
            else
                r = std::max(r, std::fabs(gq));
        }
        if (long_run) {
            double gK = g[2 * T];
            // raising K relaxes the q box; account for capacity pressure
            double press = 0.0;
            for (int t = 0; t < T; ++t)
                if (z[T + t] >= cp * (1.0 - 1e-12)) press = std::max(press, g[T + t]);
            double eff = gK + press;
            if (z[2 * T] <= 0.0)
                r = std::max(r, std::max(0.0, eff));
            else if (z[2 * T] >= K_max)
                r = std::max(r, std::max(0.0, -eff));
            else
                r = std::max(r, std::fabs(eff));
        }
        return r;
    }
};

}  // namespace

ProducerBestResponse producer_best_response(int j, const Aggregates& agg,
                                            const MarketConfig& config,
                                            const SolverOptions& opts,
                                            const ProducerStrategy* warm) {
    const int T = config.T, i = config.M + j;
    ProducerBestResponse out;
    out.strategy.b.assign(T, 0.0);
    out.strategy.q.assign(T, 0.0);

    double revenue_possible = 0.0;
    for (int t = 0; t < T; ++t) revenue_possible += agg.B_minus[i][t];
    if (!(revenue_possible > 0.0)) {
        out.flag = BrFlag::NoRevenue;
        out.payoff = producer_payoff(j, out.strategy, agg, config);
        out.trace.termination = "degenerate";
        out.foc = foc_residual_producer(j, out.strategy, agg, config);
        return out;
    }

    ProducerProblem prob{j, T, agg, config, config.horizon == Horizon::LongRun};
    prob.b_pinned.assign(T, false);
    const auto& u = config.utility[i];
    for (int t = 0; t < T; ++t)
        prob.b_pinned[t] = u.elec[t] == 0.0 || !(agg.B_minus[i][t] > 0.0);
    if (prob.long_run)
        prob.K_max = config.rho > 0.0 ? agg.Omega / config.rho : config.K_bar * 100.0;

    auto value = [&prob](const std::vector<double>& v) { return prob.value(v); };
    auto grad = [&prob](const std::vector<double>& v) { return prob.gradient(v); };
    auto project = [&prob](std::vector<double> v) { return prob.project(std::move(v)); };
    auto kkt = [&prob](const std::vector<double>& v, const std::vector<double>& g) {
        return prob.kkt(v, g);
    };

    // coarse multistart to pick a basin, then one run polished to the
    // requested tolerance
    SolverOptions coarse = opts;
    coarse.kkt_tol = std::max(opts.kkt_tol, 1e-5);
    coarse.max_iter = std::min(opts.max_iter, 2000);

    std::vector<std::vector<double>> starts;
    if (warm) {
        std::vector<double> z(prob.dim(), 0.0);
        for (int t = 0; t < T; ++t) {
            z[t] = warm->b[t];
            z[T + t] = warm->q[t];
        }
        if (prob.long_run) z[2 * T] = warm->K;
        starts.push_back(std::move(z));
    }
    for (double f : {0.25, 0.45, 0.65, 0.85, 0.10}) {
        std::vector<double> z(prob.dim(), 0.0);
        double cap = prob.long_run ? f * prob.K_max : config.K_bar;
        if (prob.long_run) z[2 * T] = cap;
        for (int t = 0; t < T; ++t) {
            z[T + t] = f * cap;
            if (!prob.b_pinned[t]) z[t] = 0.2 * f * agg.B_minus[i][t];
        }
        starts.push_back(std::move(z));
    }
    // a seed can overbid its revenue share or overproduce its numeraire
    // purchases (both -inf); shrink until feasible, which succeeds whenever
    // some scale of operation is profitable
    for (auto& z : starts) {
        for (int tries = 0; tries < 60 && !std::isfinite(prob.value(z)); ++tries)
            for (int t = 0; t < T; ++t) z[t] *= 0.5;  // bids eat the revenue share
        for (int tries = 0; tries < 60 && !std::isfinite(prob.value(z)); ++tries)
            for (int t = T; t < 2 * T; ++t) z[t] *= 0.5;  // output eats the numeraire
    }
    PgResult best;
    for (auto& z : starts) {
        auto res = projected_gradient_ascent(std::move(z), value, grad, project, kkt, coarse);
        if (best.z.empty() || res.value > best.value) best = std::move(res);
    }
    SolverOptions mid = opts;
    mid.kkt_tol = std::max(opts.kkt_tol, 1e-7);
    best = projected_gradient_ascent(std::move(best.z), value, grad, project, kkt, mid);

    // Newton polish on the strictly interior coordinates: spectral gradient
    // steps stall near the optimum well above the requested tolerance
    if (std::isfinite(best.value)) {
        auto z = best.z;
        for (int round = 0; round < 30; ++round) {
            auto g = prob.gradient(z);
            double res = prob.kkt(z, g);
            if (res <= opts.kkt_tol) break;
            double cp = prob.cap(z);
            std::vector<int> free_ix;
            for (int t = 0; t < T; ++t)
                if (!prob.b_pinned[t] && z[t] > 0.0) free_ix.push_back(t);
            for (int t = 0; t < T; ++t)
                if (z[T + t] > 0.0 && z[T + t] < cp * (1.0 - 1e-12)) free_ix.push_back(T + t);
            if (prob.long_run && z[2 * T] > 0.0 && z[2 * T] < prob.K_max)
                free_ix.push_back(2 * T);
            const int nf = static_cast<int>(free_ix.size());
            if (nf == 0) break;
            std::vector<std::vector<double>> H(nf, std::vector<double>(nf + 1, 0.0));
            for (int a = 0; a < nf; ++a) {
                double h = 1e-7 * std::max(1.0, std::fabs(z[free_ix[a]]));
                auto zp = z, zm = z;
                zp[free_ix[a]] += h;
                zm[free_ix[a]] -= h;
                auto gp = prob.gradient(zp), gm = prob.gradient(zm);
                for (int b = 0; b < nf; ++b) H[b][a] = (gp[free_ix[b]] - gm[free_ix[b]]) / (2.0 * h);
                H[a][nf] = -g[free_ix[a]];
            }
            // Gaussian elimination with partial pivoting
            bool singular = false;
            for (int col = 0; col < nf && !singular; ++col) {
                int piv = col;
                for (int r = col + 1; r < nf; ++r)
                    if (std::fabs(H[r][col]) > std::fabs(H[piv][col])) piv = r;
                if (std::fabs(H[piv][col]) < 1e-300) {
                    singular = true;
                    break;
                }
                std::swap(H[piv], H[col]);
                for (int r = col + 1; r < nf; ++r) {
                    double m = H[r][col] / H[col][col];
                    for (int cc = col; cc <= nf; ++cc) H[r][cc] -= m * H[col][cc];
                }
            }
            if (singular) break;
            std::vector<double> d(nf, 0.0);
            for (int r = nf - 1; r >= 0; --r) {
                double s = H[r][nf];
                for (int cc = r + 1; cc < nf; ++cc) s -= H[r][cc] * d[cc];
                d[r] = s / H[r][r];
            }
            double alpha = 1.0;
            bool moved = false;
            for (int bt = 0; bt < 40 && !moved; ++bt, alpha *= 0.5) {
                auto y = z;
                for (int a = 0; a < nf; ++a) y[free_ix[a]] += alpha * d[a];
                y = prob.project(std::move(y));
                if (!std::isfinite(prob.value(y))) continue;
                if (prob.kkt(y, prob.gradient(y)) < res) {
                    z = std::move(y);
                    moved = true;
                }
            }
            if (!moved) break;
        }
        double vz = prob.value(z);
        if (std::isfinite(vz) &&
            prob.kkt(z, prob.gradient(z)) <= prob.kkt(best.z, prob.gradient(best.z))) {
            best.z = std::move(z);
            best.value = vz;
        }
    }
    if (!std::isfinite(best.value)) {
        // no scale of operation is profitable against this aggregate play;
        // withdraw so the market price can recover
        out.strategy.b0 = 0.0;
        out.strategy.K = 0.0;
        out.trace = best.trace;
        out.trace.termination = "infeasible";
        out.payoff = producer_payoff(j, out.strategy, agg, config);
        out.foc = foc_residual_producer(j, out.strategy, agg, config);
        return out;
    }
    out.strategy = prob.to_strategy(best.z);
    if (out.strategy.b0 < 0.0) out.strategy.b0 = 0.0;
    out.trace = best.trace;
    out.payoff = producer_payoff(j, out.strategy, agg, config);
    out.foc = foc_residual_producer(j, out.strategy, agg, config);
    return out;
}

FocReport foc_residual_standard(int h, const StandardStrategy& s, const Aggregates& agg,
                                const MarketConfig& config) {
    const int T = config.T;
    const auto& u = config.utility[h];
    FocReport rep;
    if (is_zero_strategy(s)) {
        rep.boundary = true;
        rep.barrier = true;
        return rep;
    }
    std::vector<double> x(T, 0.0), B(T, 0.0);
    for (int t = 0; t < T; ++t) {
        B[t] = agg.B_minus[h][t] + s.b[t];
        if (B[t] > 0.0 && agg.Q[t] > 0.0) x[t] = s.b[t] / B[t] * agg.Q[t];
    }
    double B0 = agg.B0_minus[h] + s.xi;
    double x0 = (B0 > 0.0 && agg.Omega > 0.0) ? s.xi / B0 * agg.Omega : 0.0;

    // stationarity coefficients: a - lambda * g = 0 per condition
    std::vector<double> a(T + 1, 0.0), g(T + 1, 1.0);
    std::vector<bool> interior(T + 1, false);
    for (int t = 0; t < T; ++t) {
        if (u.elec[t] > 0.0 && !(x[t] > 0.0)) {
            rep.barrier = true;
            continue;
        }
        if (x[t] > 0.0 && B[t] > 0.0)
            a[t] = (u.elec[t] / x[t]) * agg.B_minus[h][t] * agg.Q[t] / (B[t] * B[t]);
        interior[t] = s.b[t] > 0.0;
        if (!interior[t]) rep.boundary = true;
    }
    g[T] = agg.Omega > 0.0 ? agg.Omega_minus[h] / agg.Omega : 0.0;
    if (u.numeraire > 0.0 && !(x0 > 0.0)) {
        rep.barrier = true;
    } else if (x0 > 0.0 && B0 > 0.0) {
        a[T] = (u.numeraire / x0) * agg.B0_minus[h] * agg.Omega / (B0 * B0);
    }
    interior[T] = s.xi > 0.0;
    if (!interior[T]) rep.boundary = true;

    std::vector<std::pair<double, double>> ag;
    for (int k = 0; k <= T; ++k)
        if (interior[k]) ag.emplace_back(a[k], g[k]);
    rep.lambda = least_squares_lambda(ag);
    for (int k = 0; k <= T; ++k) {
        double r = interior[k] ? std::fabs(a[k] - rep.lambda * g[k])
                               : std::max(0.0, a[k] - rep.lambda * g[k]);
        rep.stationarity_residuals.push_back(r);
        rep.max_residual = std::max(rep.max_residual, r);
    }
    return rep;
}

FocReport foc_residual_producer(int j, const ProducerStrategy& s, const Aggregates& agg,
                                const MarketConfig& config) {
    const int T = config.T, i = config.M + j;
    const auto& u = config.utility[i];
    FocReport rep;
    rep.mu.assign(T, 0.0);

    std::vector<double> x(T, 0.0), B(T, 0.0), Q(T, 0.0);
    for (int t = 0; t < T; ++t) {
        B[t] = agg.B_minus[i][t] + s.b[t];
        Q[t] = agg.Q_minus[j][t] + s.q[t];
        if (B[t] > 0.0 && Q[t] > 0.0) x[t] = s.b[t] / B[t] * Q[t];
    }
    double B0 = agg.B0_minus[i] + s.b0;
    double purchases = (B0 > 0.0 && agg.Omega > 0.0) ? s.b0 / B0 * agg.Omega : 0.0;
    double x0 = purchases - required_input_total(s, config);

    bool all_zero = s.b0 == 0.0;
    for (int t = 0; t < T; ++t) all_zero = all_zero && s.b[t] == 0.0 && s.q[t] == 0.0;
    if (all_zero) {
        rep.boundary = true;
        rep.barrier = true;
        return rep;
    }

    auto mut = [&](int t) { return u.elec[t] > 0.0 && x[t] > 0.0 ? u.elec[t] / x[t] : 0.0; };
    double u0 = u.numeraire > 0.0 && x0 > 0.0 ? u.numeraire / x0 : 0.0;
    if (u.numeraire > 0.0 && !(x0 > 0.0)) rep.barrier = true;
    for (int t = 0; t < T; ++t)
        if (u.elec[t] > 0.0 && !(x[t] > 0.0)) rep.barrier = true;

    // lambda from the bid conditions (Eq 12 per interior b^t, Eq 13 for b0)
    std::vector<std::pair<double, double>> ag;
    std::vector<double> a12(T, 0.0), g12(T, 0.0);
    for (int t = 0; t < T; ++t) {
        if (!(B[t] > 0.0 && Q[t] > 0.0)) continue;
        a12[t] = mut(t) * agg.B_minus[i][t] * Q[t] / (B[t] * B[t]);
        g12[t] = agg.Q_minus[j][t] / Q[t];
        if (s.b[t] > 0.0) ag.emplace_back(a12[t], g12[t]);
    }
    double a13 = B0 > 0.0 ? u0 * agg.B0_minus[i] * agg.Omega / (B0 * B0) : 0.0;
    if (s.b0 > 0.0) ag.emplace_back(a13, 1.0);
    rep.lambda = least_squares_lambda(ag);

    for (int t = 0; t < T; ++t) {
        double r = s.b[t] > 0.0 ? std::fabs(a12[t] - rep.lambda * g12[t])
                                : std::max(0.0, a12[t] - rep.lambda * g12[t]);
        if (s.b[t] == 0.0) rep.boundary = true;
        rep.stationarity_residuals.push_back(r);
    }
    {
        double r = s.b0 > 0.0 ? std::fabs(a13 - rep.lambda) : std::max(0.0, a13 - rep.lambda);
        if (s.b0 == 0.0) rep.boundary = true;
        rep.stationarity_residuals.push_back(r);
    }

    // capacity conditions (Eqs 14-16)
    const double cap = config.horizon == Horizon::ShortRun ? config.K_bar : s.K;
    const double cap_tol = 1e-9 * (1.0 + cap);
    double comp_slack = 0.0;
    for (int t = 0; t < T; ++t) {
        if (!(Q[t] > 0.0)) {
            rep.boundary = true;
            rep.stationarity_residuals.push_back(0.0);
            continue;
        }
        double d_expanded = dphi_dq(s.q[t], config);
        double d_direct = dphi_dq_direct(s.q[t], config);
        if (std::isfinite(d_expanded) && std::isfinite(d_direct))
            rep.marginal_input_consistency =
                std::max(rep.marginal_input_consistency, std::fabs(d_expanded - d_direct));
        else
            rep.boundary = true;  // c > 1 at q = 0: marginal input diverges
        double m = (B[t] > 0.0 ? mut(t) * s.b[t] / B[t] : 0.0) - u0 * d_expanded +
                   rep.lambda * B[t] * agg.Q_minus[j][t] / (Q[t] * Q[t]);
        double r;
        if (s.q[t] >= cap - cap_tol) {
            rep.mu[t] = std::max(0.0, m);
            r = std::max(0.0, -m);
        } else if (s.q[t] <= cap_tol) {
            rep.mu[t] = 0.0;
            r = std::max(0.0, m);
            rep.boundary = true;
        } else {
            rep.mu[t] = 0.0;
            r = std::fabs(m);
        }
        rep.stationarity_residuals.push_back(r);
        comp_slack += rep.mu[t] * (cap - s.q[t]);
    }
    rep.complementary_slackness = comp_slack;
    for (double r : rep.stationarity_residuals) rep.max_residual = std::max(rep.max_residual, r);
    rep.max_residual = std::max(rep.max_residual, std::fabs(comp_slack));
    return rep;
}

namespace {

double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          int iters = 80) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < iters; ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        }
    }
    return f1 >= f2 ? x1 : x2;
}

}  // namespace

StandardBestResponse oracle_standard_best_response(int h, const Aggregates& agg,
                                                   const MarketConfig& config,
                                                   const OracleOptions& opts) {
    const int T = config.T;
    if (T + 1 > 4) throw std::invalid_argument("oracle limited to at most 4 dimensions");
    const auto& u = config.utility[h];
    StandardBestResponse out;
    out.strategy.b.assign(T, 0.0);
    out.strategy.omega_offer = config.omega[h];
    if (!(agg.Omega > 0.0)) throw std::invalid_argument("degenerate economy: Omega = 0");
    const double budget = agg.B0_minus[h] / agg.Omega * config.omega[h];
    if (budget <= 0.0) {
        out.flag = config.omega[h] <= 0.0 ? BrFlag::ZeroEndowment : BrFlag::NoMarket;
        out.payoff = standard_payoff(h, out.strategy, agg, config);
        return out;
    }

    const int n = T + 1;
    std::vector<double> w(n, 1.0);
    w[T] = agg.Omega_minus[h] / agg.Omega;
    std::vector<bool> pinned(n, false);
    for (int t = 0; t < T; ++t)
        pinned[t] = u.elec[t] == 0.0 || !(agg.B_minus[h][t] > 0.0) || !(agg.Q[t] > 0.0);
    pinned[T] = u.numeraire == 0.0 || !(agg.B0_minus[h] > 0.0) || !(w[T] > 0.0);

    auto eval = [&](const std::vector<double>& z) {
        StandardStrategy s;
        s.b.assign(z.begin(), z.begin() + T);
        s.xi = z[T];
        s.omega_offer = config.omega[h];
        double spend = 0.0;
        for (int k = 0; k < n; ++k) spend += w[k] * z[k];
        if (spend > budget * (1.0 + 1e-12)) return -kInf;
        return standard_payoff(h, s, agg, config);
    };

    // grid sweep over feasible shares of the budget
    std::vector<int> free_dims;
    for (int k = 0; k < n; ++k)
        if (!pinned[k]) free_dims.push_back(k);
    const int G = opts.grid;
    std::vector<double> best(n, 0.0);
    double best_val = -kInf;
    std::vector<int> idx(free_dims.size(), 0);
    while (true) {
        std::vector<double> z(n, 0.0);
        double spend = 0.0;
        for (std::size_t d = 0; d < free_dims.size(); ++d) {
            int k = free_dims[d];
            double frac = (idx[d] + 1.0) / (G + 1.0);
            z[k] = frac * budget / (w[k] > 0.0 ? w[k] : 1.0);
            spend += w[k] * z[k];
        }
        if (spend <= budget * (1.0 + 1e-12)) {
            double v = eval(z);
            if (v > best_val) {
                best_val = v;
                best = z;
            }
        }
        std::size_t d = 0;
        for (; d < idx.size(); ++d) {
            if (++idx[d] < G) break;
            idx[d] = 0;
        }
        if (d == idx.size()) break;
    }

    // single-coordinate refinement stalls once the budget binds, so refine by
    // transferring spend between coordinate pairs at fixed total
    for (int pass = 0; pass < 200; ++pass) {
        double before = best_val;
        for (int k : free_dims) {
            double others = 0.0;
            for (int m = 0; m < n; ++m)
                if (m != k) others += w[m] * best[m];
            double hi = (budget - others) / (w[k] > 0.0 ? w[k] : 1.0);
            if (hi <= 0.0) continue;
            auto line = [&](double v) {
                auto z = best;
                z[k] = v;
                return eval(z);
            };
            best[k] = golden_section_max(line, 0.0, hi);
        }
        for (int k : free_dims)
            for (int m : free_dims) {
                if (m <= k) continue;
                double pool = w[k] * best[k] + w[m] * best[m];
                if (!(pool > 0.0)) continue;
                auto line = [&](double fk) {
                    auto z = best;
                    z[k] = fk * pool / w[k];
                    z[m] = (1.0 - fk) * pool / w[m];
                    return eval(z);
                };
                double fk = golden_section_max(line, 0.0, 1.0);
                best[k] = fk * pool / w[k];
                best[m] = (1.0 - fk) * pool / w[m];
            }
        best_val = eval(best);
        if (pass >= opts.refine_passes && best_val - before <= 1e-13 * (1.0 + std::fabs(best_val)))
            break;
    }

    out.strategy.b.assign(best.begin(), best.begin() + T);
    out.strategy.xi = best[T];
    out.payoff = standard_payoff(h, out.strategy, agg, config);
    out.foc = foc_residual_standard(h, out.strategy, agg, config);
    return out;
}

ProducerBestResponse oracle_producer_best_response(int j, const Aggregates& agg,
                                                   const MarketConfig& config,
                                                   const OracleOptions& opts) {
    const int T = config.T, i = config.M + j;
    const bool long_run = config.horizon == Horizon::LongRun;
    const int dim = 2 * T + (long_run ? 1 : 0);
    if (dim > 4) throw std::invalid_argument("oracle limited to at most 4 dimensions");
    const auto& u = config.utility[i];

    ProducerBestResponse out;
    out.strategy.b.assign(T, 0.0);
    out.strategy.q.assign(T, 0.0);
    double revenue_possible = 0.0;
    for (int t = 0; t < T; ++t) revenue_possible += agg.B_minus[i][t];
    if (!(revenue_possible > 0.0)) {
        out.flag = BrFlag::NoRevenue;
        out.payoff = producer_payoff(j, out.strategy, agg, config);
        return out;
    }

    ProducerProblem prob{j, T, agg, config, long_run};
    prob.b_pinned.assign(T, false);
    for (int t = 0; t < T; ++t)
        prob.b_pinned[t] = u.elec[t] == 0.0 || !(agg.B_minus[i][t] > 0.0);
    if (long_run) prob.K_max = config.rho > 0.0 ? agg.Omega / config.rho : config.K_bar * 100.0;

    // per-dimension search boxes: bids up to 3x the opposing bid mass
    std::vector<double> hi(dim, 0.0);
    for (int t = 0; t < T; ++t) hi[t] = prob.b_pinned[t] ? 0.0 : 3.0 * agg.B_minus[i][t] + 1.0;
    for (int t = 0; t < T; ++t) hi[T + t] = long_run ? prob.K_max : config.K_bar;
    if (long_run) hi[2 * T] = prob.K_max;

    auto eval = [&prob](const std::vector<double>& z) { return prob.value(z); };

    const int G = opts.grid;
    std::vector<double> best(dim, 0.0);
    double best_val = -kInf;
    std::vector<int> idx(dim, 0);
    while (true) {
        std::vector<double> z(dim, 0.0);
        for (int d = 0; d < dim; ++d) z[d] = hi[d] * (idx[d] + 1.0) / (G + 1.0);
        double v = eval(z);
        if (v > best_val) {
            best_val = v;
            best = z;
        }
        int d = 0;
        for (; d < dim; ++d) {
            if (++idx[d] < G) break;
            idx[d] = 0;
        }
        if (d == dim) break;
    }

    for (int pass = 0; pass < 200; ++pass) {
        double before = best_val;
        for (int d = 0; d < dim; ++d) {
            if (hi[d] <= 0.0) continue;
            double top = hi[d];
            if (d >= T && d < 2 * T && long_run) top = best[2 * T];  // q <= K
            auto line = [&](double v) {
                auto z = best;
                z[d] = v;
                return eval(z);
            };
            best[d] = golden_section_max(line, 0.0, top);
        }
        best_val = eval(best);
        if (pass >= opts.refine_passes && best_val - before <= 1e-13 * (1.0 + std::fabs(best_val)))
            break;
    }

    out.strategy = prob.to_strategy(best);
    if (out.strategy.b0 < 0.0) out.strategy.b0 = 0.0;
    out.payoff = producer_payoff(j, out.strategy, agg, config);
    out.foc = foc_residual_producer(j, out.strategy, agg, config);
    return out;
}

}  // namespace emg
