#pragma once

#include <span>
#include <string>
#include <vector>

// Trading-post market core: economy description, strategies, aggregates,
// prices, allocation rules, budget and production feasibility.
namespace emg {

enum class Horizon { ShortRun, LongRun };

// Per-agent weights of the log utility
//   u_i = sum_t elec[t] * ln(x_i^t) + numeraire * ln(x_i^0).
struct UtilityWeights {
    std::vector<double> elec;  // one weight per electricity period
    double numeraire = 0.0;

    double total() const;
};

struct MarketConfig {
    int T = 1;  // electricity periods (posts 1..T)
    int M = 0;  // standard agents
    int P = 0;  // producers

    double theta = 1.0;  // total factor productivity
    double c = 1.0;      // returns exponent of f(phi) = theta * phi^c
    double rho = 0.0;    // per-unit capacity cost (long run)
    double K_bar = 1.0;  // short-run capacity
    Horizon horizon = Horizon::ShortRun;

    std::vector<double> omega;            // endowment per standard agent, size M
    std::vector<UtilityWeights> utility;  // size M + P, standard agents first
    double money_supply = 1.0;

    int num_agents() const { return M + P; }
    double total_endowment() const;
    const UtilityWeights& standard_utility(int h) const { return utility[h]; }
    const UtilityWeights& producer_utility(int j) const { return utility[M + j]; }

    // Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

struct StandardStrategy {
    std::vector<double> b;     // bids on electricity posts 1..T
    double xi = 0.0;           // bid on the numeraire post
    double omega_offer = 0.0;  // sell-all: equals the agent's endowment

    double max_bid() const;
};

struct ProducerStrategy {
    std::vector<double> b;  // bids on electricity posts
    double b0 = 0.0;        // bid on the numeraire post
    std::vector<double> q;  // electricity offers per period
    double K = 0.0;         // chosen capacity (long run only)

    double max_bid() const;
};

struct StrategyProfile {
    std::vector<StandardStrategy> standard;
    std::vector<ProducerStrategy> producer;
};

// Market totals plus the leave-one-out variants the first-order
// conditions are written in. Agent indices run standard 0..M-1 then
// producers M..M+P-1.
struct Aggregates {
    std::vector<double> B;  // total bid per electricity post
    double B0 = 0.0;        // total bid on the numeraire post
    std::vector<double> Q;  // total electricity offered per period
    double Omega = 0.0;     // total consumption-good offer

    std::vector<std::vector<double>> B_minus;  // [agent][t]
    std::vector<double> B0_minus;              // [agent]
    std::vector<std::vector<double>> Q_minus;  // [producer][t]
    std::vector<double> Omega_minus;           // [standard agent]
};

struct PriceVector {
    std::vector<double> p;           // bytecoins per unit electricity
    double p0 = 0.0;                 // bytecoins per unit consumption good
    std::vector<bool> defined_mask;  // per electricity post
    bool p0_defined = false;
};

struct AllocationSet {
    std::vector<std::vector<double>> x;    // [agent][t] electricity received
    std::vector<double> x0;                // [agent] consumption good, net of inputs
    std::vector<std::vector<double>> phi;  // [producer][t] input used
    std::vector<bool> producer_infeasible;  // x_j^0 < 0
};

// Both algebraic forms of a budget constraint's slack; they must agree.
struct BudgetSlack {
    double slack = 0.0;  // simplified form (own bids isolated)
    double raw = 0.0;    // original form
};

struct ConstraintViolation {
    std::string what;
    double margin = 0.0;  // negative when violated
};

struct FeasibilityReport {
    bool feasible = true;
    double required_input = 0.0;  // total consumption good needed for (q, K)
    std::vector<ConstraintViolation> violations;
};

struct ClearingResiduals {
    std::vector<double> electricity;  // per post
    double numeraire = 0.0;

    double max_abs() const;
};

Aggregates compute_aggregates(const StrategyProfile& profile, const MarketConfig& config);

PriceVector prices(const Aggregates& agg);

AllocationSet allocate(const StrategyProfile& profile, const Aggregates& agg,
                       const MarketConfig& config);

// phi^t = (q^t / theta)^(1/c), the input needed to produce q^t.
std::vector<double> input_requirement(std::span<const double> q, const MarketConfig& config);

// Total input for a producer strategy; includes rho*K in the long run.
double required_input_total(const ProducerStrategy& s, const MarketConfig& config);

BudgetSlack check_budget_standard(int h, const StandardStrategy& s, const Aggregates& agg);

BudgetSlack check_budget_producer(int j, const ProducerStrategy& s, const Aggregates& agg);

FeasibilityReport check_production_feasible(const ProducerStrategy& s, const MarketConfig& config);

ClearingResiduals market_clearing_residuals(const AllocationSet& alloc, const Aggregates& agg);

// Weighted log utility; -inf as soon as a positively weighted good has a
// nonpositive allocation (barrier convention).
double log_utility(const UtilityWeights& w, std::span<const double> x_elec, double x0);

// Utility of agent i (combined index) at an allocation. Long-run producers
// additionally pay rho*K out of their numeraire allocation.
double agent_utility(int i, const AllocationSet& alloc, const StrategyProfile& profile,
                     const MarketConfig& config);

}  // namespace emg
