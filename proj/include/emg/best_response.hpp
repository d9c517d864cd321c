#pragma once

#include <string>
#include <vector>

#include "emg/market.hpp"

// Per-agent constrained utility maximization against fixed opponent
// aggregates, plus evaluation of the first-order conditions as residuals.
//
// All entry points take the full-profile Aggregates and use the
// leave-one-out fields for the agent in question, so the agent's own
// current strategy in the profile is irrelevant.
namespace emg {

struct SolverOptions {
    double tol = 1e-8;        // payoff/FOC target
    double kkt_tol = 1e-12;   // internal projected-gradient stop
    int max_iter = 50000;
};

struct FocReport {
    double lambda = 0.0;                         // budget multiplier
    std::vector<double> mu;                      // capacity multipliers (producers)
    std::vector<double> stationarity_residuals;  // one per FOC equation
    double complementary_slackness = 0.0;        // mu . (cap*1 - q)
    double max_residual = 0.0;
    double marginal_input_consistency = 0.0;  // gap between the two marginal-input forms
    bool boundary = false;  // some condition evaluated at a boundary point
    bool barrier = false;   // zero allocation with positive utility weight
};

struct SolverTrace {
    int iterations = 0;
    double final_step = 0.0;
    std::string termination;
};

enum class BrFlag { None, ZeroEndowment, NoMarket, NoRevenue };

struct StandardBestResponse {
    StandardStrategy strategy;
    double payoff = 0.0;
    FocReport foc;
    SolverTrace trace;
    BrFlag flag = BrFlag::None;
};

struct ProducerBestResponse {
    ProducerStrategy strategy;
    double payoff = 0.0;
    FocReport foc;
    SolverTrace trace;
    BrFlag flag = BrFlag::None;
};

// Utility the agent achieves by playing s against the opponents encoded
// in agg's leave-one-out fields.
double standard_payoff(int h, const StandardStrategy& s, const Aggregates& agg,
                       const MarketConfig& config);
double producer_payoff(int j, const ProducerStrategy& s, const Aggregates& agg,
                       const MarketConfig& config);

// warm, when given, seeds the solver with the agent's current play; the
// multistart seeds are still explored (coarsely) so the result does not
// depend on the warm start being good.
StandardBestResponse standard_best_response(int h, const Aggregates& agg,
                                            const MarketConfig& config,
                                            const SolverOptions& opts = {},
                                            const StandardStrategy* warm = nullptr);

ProducerBestResponse producer_best_response(int j, const Aggregates& agg,
                                            const MarketConfig& config,
                                            const SolverOptions& opts = {},
                                            const ProducerStrategy* warm = nullptr);

FocReport foc_residual_standard(int h, const StandardStrategy& s, const Aggregates& agg,
                                const MarketConfig& config);

FocReport foc_residual_producer(int j, const ProducerStrategy& s, const Aggregates& agg,
                                const MarketConfig& config);

struct OracleOptions {
    int grid = 15;          // points per dimension in the initial sweep
    int refine_passes = 10;  // coordinate golden-section passes
};

// Grid search over the budget-feasible box plus coordinate-wise
// golden-section refinement. Independent of the gradient solver; used as
// a testing oracle. Refuses instances with more than 4 free dimensions.
StandardBestResponse oracle_standard_best_response(int h, const Aggregates& agg,
                                                   const MarketConfig& config,
                                                   const OracleOptions& opts = {});
ProducerBestResponse oracle_producer_best_response(int j, const Aggregates& agg,
                                                   const MarketConfig& config,
                                                   const OracleOptions& opts = {});

}  // namespace emg
