#include "emg/crypto.hpp"

#include <stdexcept>

namespace emg {

CryptoEntry split_allocation(const CryptoScenario& scenario, int agent, int state) {
    CryptoEntry e;
    const double B = scenario.B[agent][state];
    if (B > scenario.v) {
        // U strictly increasing: the budget binds, V is the fixed cost
        e.active = true;
        e.V = scenario.v;
        e.E = B - scenario.v;
        e.lambda = scenario.log_weight[agent] / e.E;
    }
    return e;  // B <= v: the constraint set admits only abstention
}

CryptoAllocation split_all(const CryptoScenario& scenario) {
    CryptoAllocation alloc;
    alloc.entries.resize(scenario.B.size());
    for (std::size_t i = 0; i < scenario.B.size(); ++i) {
        alloc.entries[i].resize(scenario.S);
        for (int s = 0; s < scenario.S; ++s)
            alloc.entries[i][s] = split_allocation(scenario, static_cast<int>(i), s);
    }
    return alloc;
}

CryptoLink link_to_market(const EquilibriumResult& eq, const MarketConfig& config, double v,
                          std::span<const double> state_scalings) {
    if (!eq.converged) throw std::invalid_argument("equilibrium did not converge");
    CryptoLink link;
    link.scenario.S = static_cast<int>(state_scalings.size());
    link.scenario.v = v;
    const int N = config.num_agents();
    link.scenario.B.assign(N, std::vector<double>(link.scenario.S, 0.0));
    link.scenario.log_weight.assign(N, 0.0);
    for (int i = 0; i < N; ++i) {
        double total_elec = 0.0;
        for (int t = 0; t < config.T; ++t) total_elec += eq.allocations.x[i][t];
        for (int s = 0; s < link.scenario.S; ++s)
            link.scenario.B[i][s] = state_scalings[s] * total_elec;
        double w = 0.0;
        for (double a : config.utility[i].elec) w += a;
        link.scenario.log_weight[i] = w;
    }
    link.allocation = split_all(link.scenario);
    link.overhead_share.assign(N, 0.0);
    for (int i = 0; i < N; ++i) {
        double e = 0.0, vv = 0.0;
        for (const auto& entry : link.allocation.entries[i]) {
            e += entry.E;
            vv += entry.V;
        }
        if (e + vv > 0.0) link.overhead_share[i] = vv / (e + vv);
    }
    return link;
}

std::vector<CryptoStateSummary> verification_overhead_report(const CryptoAllocation& alloc) {
    if (alloc.entries.empty()) return {};
    std::vector<CryptoStateSummary> out(alloc.entries[0].size());
    for (const auto& agent : alloc.entries) {
        for (std::size_t s = 0; s < agent.size(); ++s) {
            out[s].total_E += agent[s].E;
            out[s].total_V += agent[s].V;
            if (!agent[s].active) ++out[s].abstained;
        }
    }
    for (auto& s : out) {
        double total = s.total_E + s.total_V;
        if (total > 0.0) s.overhead_ratio = s.total_V / total;
    }
    return out;
}

}  // namespace emg
