#pragma once

#include <span>
#include <vector>

#include "emg/equilibrium.hpp"

// Consumption/verification split of prepaid electricity budgets. Each
// transaction bundle costs a fixed amount of electricity v; an agent with
// budget B either verifies (V = v, E = B - v) or abstains.
namespace emg {

struct CryptoScenario {
    int S = 1;                              // states
    std::vector<std::vector<double>> B;     // [agent][state] prepaid budgets
    double v = 0.0;                          // verification energy per bundle
    std::vector<double> log_weight;          // U_i(E) = log_weight[i] * ln(E)
};

struct CryptoEntry {
    double E = 0.0;
    double V = 0.0;
    double lambda = 0.0;  // shadow price, U'(E) when active
    bool active = false;
};

struct CryptoAllocation {
    std::vector<std::vector<CryptoEntry>> entries;  // [agent][state]
};

CryptoEntry split_allocation(const CryptoScenario& scenario, int agent, int state);

CryptoAllocation split_all(const CryptoScenario& scenario);

struct CryptoLink {
    CryptoScenario scenario;
    CryptoAllocation allocation;
    std::vector<double> overhead_share;  // per agent: sum V / sum (E+V)
};

// Budgets from a converged equilibrium: B_is = scaling_s * total
// equilibrium electricity of agent i; U is the electricity-weighted log
// term of the agent's utility.
CryptoLink link_to_market(const EquilibriumResult& eq, const MarketConfig& config, double v,
                          std::span<const double> state_scalings);

struct CryptoStateSummary {
    double total_E = 0.0;
    double total_V = 0.0;
    double overhead_ratio = 0.0;  // sum V / sum (E+V), 0 when nothing allocated
    int abstained = 0;
};

std::vector<CryptoStateSummary> verification_overhead_report(const CryptoAllocation& alloc);

}  // namespace emg
