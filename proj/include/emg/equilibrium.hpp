#pragma once

#include <optional>
#include <vector>

#include "emg/best_response.hpp"
#include "emg/market.hpp"

namespace emg {

enum class SweepMode { GaussSeidel, Jacobi };

struct SolveOptions {
    double damping = 0.5;   // in (0, 1]
    double tol = 1e-8;      // sup-norm strategy change
    double foc_tol = 1e-6;  // per-agent FOC residual
    int max_iter = 2000;
    SweepMode mode = SweepMode::GaussSeidel;
    SolverOptions inner;
};

struct EquilibriumResult {
    StrategyProfile profile;  // normalized so B^0 = money_supply
    PriceVector prices;
    AllocationSet allocations;
    std::vector<FocReport> foc_reports;  // one per agent
    std::vector<double> payoffs;
    int iterations = 0;
    double max_strategy_change = 0.0;
    bool converged = false;
    bool trivial = false;  // the no-trade fixed point
    double damping_used = 0.0;
};

// Strictly interior starting profile (proportional bids from endowment
// shares); avoids the no-trade fixed point.
StrategyProfile default_interior_profile(const MarketConfig& config);

// Damped Gauss-Seidel / Jacobi iterated best response.
EquilibriumResult solve_nash(const MarketConfig& config,
                             std::optional<StrategyProfile> init = std::nullopt,
                             const SolveOptions& opts = {});

// Scales every bid by money_supply / B^0; real allocations are invariant.
// B^0 = 0 is left untouched (the trivial profile cannot be normalized).
StrategyProfile normalize_nominal(StrategyProfile profile, double money_supply);

// n identical copies of every agent.
MarketConfig replicate_economy(const MarketConfig& config, int n);

struct CompetitiveBenchmark {
    std::vector<double> p;               // electricity prices, numeraire = 1
    std::vector<std::vector<double>> x;  // [agent][t] electricity demand
    std::vector<double> x0;              // [agent] numeraire consumption
    std::vector<std::vector<double>> q;  // [producer][t] supply
    std::vector<double> profit;          // [producer]
    double excess_demand_residual = 0.0;
};

// Walrasian equilibrium of the same economy under price taking; requires
// c <= 1 (profit maximization is unbounded under increasing returns).
CompetitiveBenchmark competitive_benchmark(const MarketConfig& config);

struct ReplicationRow {
    int n = 1;
    std::vector<double> nash_price;  // renormalized so p^0 = 1
    std::vector<double> competitive_price;
    double gap = 0.0;  // sup-norm
    bool converged = false;
};

std::vector<ReplicationRow> convergence_experiment(const MarketConfig& config,
                                                   const std::vector<int>& replications,
                                                   const SolveOptions& opts = {});

}  // namespace emg
