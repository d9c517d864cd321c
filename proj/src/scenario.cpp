#include "emg/scenario.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace emg {

namespace {

using nlohmann::json;

json parse_strict_json(const std::string& text) {
    std::vector<std::set<std::string>> key_stack;
    auto cb = [&key_stack](int /*depth*/, json::parse_event_t event, json& parsed) {
        switch (event) {
            case json::parse_event_t::object_start:
                key_stack.emplace_back();
                break;
            case json::parse_event_t::object_end:
                key_stack.pop_back();
                break;
            case json::parse_event_t::key: {
                auto key = parsed.get<std::string>();
                if (!key_stack.back().insert(key).second)
                    throw ScenarioError("duplicate key: " + key);
                break;
            }
            default:
                break;
        }
        return true;
    };
    try {
        return json::parse(text, cb);
    } catch (const json::parse_error& e) {
        throw ScenarioError(std::string("malformed JSON: ") + e.what());
    }
}

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ScenarioError(where + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.contains(key)) throw ScenarioError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_required(const json& obj, const std::string& where, const std::string& key) {
    if (!obj.contains(key)) throw ScenarioError(where + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ScenarioError(where + ": field '" + key + "' has the wrong type");
    }
}

template <typename T>
T get_optional(const json& obj, const std::string& where, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    return get_required<T>(obj, where, key);
}

UtilityWeights parse_utility(const json& obj, const std::string& where) {
    require_keys(obj, where, {"elec", "numeraire"});
    UtilityWeights w;
    w.elec = get_required<std::vector<double>>(obj, where, "elec");
    w.numeraire = get_optional<double>(obj, where, "numeraire", 0.0);
    return w;
}

MarketConfig parse_market(const json& obj) {
    const std::string where = "market";
    require_keys(obj, where,
                 {"T", "M", "P", "theta", "c", "rho", "K_bar", "horizon", "omega",
                  "utility_standard", "utility_producer", "money_supply"});
    MarketConfig cfg;
    cfg.T = get_required<int>(obj, where, "T");
    cfg.M = get_required<int>(obj, where, "M");
    cfg.P = get_required<int>(obj, where, "P");
    cfg.theta = get_required<double>(obj, where, "theta");
    cfg.c = get_required<double>(obj, where, "c");
    cfg.rho = get_optional<double>(obj, where, "rho", 0.0);
    cfg.K_bar = get_required<double>(obj, where, "K_bar");
    auto horizon = get_optional<std::string>(obj, where, "horizon", "short_run");
    if (horizon == "short_run")
        cfg.horizon = Horizon::ShortRun;
    else if (horizon == "long_run")
        cfg.horizon = Horizon::LongRun;
    else
        throw ScenarioError("market.horizon must be 'short_run' or 'long_run'");
    cfg.omega = get_required<std::vector<double>>(obj, where, "omega");
    cfg.money_supply = get_optional<double>(obj, where, "money_supply", 1.0);
    auto std_u = obj.contains("utility_standard") ? obj.at("utility_standard") : json::array();
    auto prod_u = obj.contains("utility_producer") ? obj.at("utility_producer") : json::array();
    if (!std_u.is_array() || !prod_u.is_array())
        throw ScenarioError("market: utility lists must be arrays");
    int k = 0;
    for (const auto& u : std_u)
        cfg.utility.push_back(parse_utility(u, "market.utility_standard[" + std::to_string(k++) + "]"));
    k = 0;
    for (const auto& u : prod_u)
        cfg.utility.push_back(parse_utility(u, "market.utility_producer[" + std::to_string(k++) + "]"));
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("market: ") + e.what());
    }
    return cfg;
}

SolverSection parse_solver(const json& obj) {
    const std::string where = "solver";
    require_keys(obj, where, {"damping", "tol", "foc_tol", "max_iter", "mode", "seed"});
    SolverSection s;
    s.opts.damping = get_optional<double>(obj, where, "damping", 0.5);
    s.opts.tol = get_optional<double>(obj, where, "tol", 1e-8);
    s.opts.foc_tol = get_optional<double>(obj, where, "foc_tol", 1e-6);
    s.opts.max_iter = get_optional<int>(obj, where, "max_iter", 2000);
    auto mode = get_optional<std::string>(obj, where, "mode", "gauss-seidel");
    if (mode == "gauss-seidel")
        s.opts.mode = SweepMode::GaussSeidel;
    else if (mode == "jacobi")
        s.opts.mode = SweepMode::Jacobi;
    else
        throw ScenarioError("solver.mode must be 'gauss-seidel' or 'jacobi'");
    s.seed = get_optional<std::uint64_t>(obj, where, "seed", 0);
    if (!(s.opts.damping > 0.0 && s.opts.damping <= 1.0))
        throw ScenarioError("solver.damping must be in (0, 1]");
    if (!(s.opts.tol > 0.0)) throw ScenarioError("solver.tol must be > 0");
    if (s.opts.max_iter < 1) throw ScenarioError("solver.max_iter must be >= 1");
    return s;
}

CryptoSection parse_crypto(const json& obj) {
    const std::string where = "crypto";
    require_keys(obj, where, {"S", "v", "state_scalings"});
    CryptoSection c;
    c.S = get_optional<int>(obj, where, "S", 1);
    c.v = get_optional<double>(obj, where, "v", 0.0);
    c.state_scalings =
        get_optional<std::vector<double>>(obj, where, "state_scalings", std::vector<double>{1.0});
    if (c.S < 1) throw ScenarioError("crypto.S must be >= 1");
    if (c.v < 0.0) throw ScenarioError("crypto.v must be >= 0");
    if (static_cast<int>(c.state_scalings.size()) != c.S)
        throw ScenarioError("crypto.state_scalings must have S entries");
    return c;
}

std::vector<Experiment> parse_experiments(const json& arr) {
    if (!arr.is_array()) throw ScenarioError("experiments: expected an array");
    std::vector<Experiment> out;
    for (const auto& e : arr) {
        Experiment exp;
        if (e.is_string()) {
            auto name = e.get<std::string>();
            if (name == "nash")
                exp.kind = ExperimentKind::Nash;
            else if (name == "competitive")
                exp.kind = ExperimentKind::Competitive;
            else if (name == "crypto-link")
                exp.kind = ExperimentKind::CryptoLink;
            else
                throw ScenarioError("experiments: unknown experiment '" + name + "'");
        } else if (e.is_object()) {
            require_keys(e, "experiments[]", {"replication"});
            exp.kind = ExperimentKind::Replication;
            exp.replications = get_required<std::vector<int>>(e, "experiments[]", "replication");
            for (int n : exp.replications)
                if (n < 1) throw ScenarioError("experiments: replication counts must be >= 1");
        } else {
            throw ScenarioError("experiments: entries must be strings or {\"replication\":[...]}");
        }
        out.push_back(std::move(exp));
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f << content;
    }
    std::filesystem::rename(tmp, path);
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

ScenarioFile parse_scenario(const std::string& text) {
    json root = parse_strict_json(text);
    require_keys(root, "scenario", {"schema_version", "market", "solver", "crypto", "experiments"});
    ScenarioFile s;
    s.schema_version = get_required<std::string>(root, "scenario", "schema_version");
    if (s.schema_version != "1")
        throw ScenarioError("unsupported schema_version '" + s.schema_version + "'");
    if (!root.contains("market")) throw ScenarioError("scenario: missing field 'market'");
    s.market = parse_market(root.at("market"));
    s.solver = root.contains("solver") ? parse_solver(root.at("solver")) : SolverSection{};
    s.crypto = root.contains("crypto") ? parse_crypto(root.at("crypto")) : CryptoSection{};
    if (root.contains("experiments")) s.experiments = parse_experiments(root.at("experiments"));
    return s;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ScenarioError("cannot open scenario file: " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_scenario(ss.str());
}

std::string scenario_to_json(const ScenarioFile& s) {
    json market{
        {"T", s.market.T},
        {"M", s.market.M},
        {"P", s.market.P},
        {"theta", s.market.theta},
        {"c", s.market.c},
        {"rho", s.market.rho},
        {"K_bar", s.market.K_bar},
        {"horizon", s.market.horizon == Horizon::ShortRun ? "short_run" : "long_run"},
        {"omega", s.market.omega},
        {"money_supply", s.market.money_supply},
    };
    json std_u = json::array(), prod_u = json::array();
    for (int i = 0; i < s.market.num_agents(); ++i) {
        json u{{"elec", s.market.utility[i].elec}, {"numeraire", s.market.utility[i].numeraire}};
        (i < s.market.M ? std_u : prod_u).push_back(u);
    }
    market["utility_standard"] = std_u;
    market["utility_producer"] = prod_u;

    json experiments = json::array();
    for (const auto& e : s.experiments) {
        switch (e.kind) {
            case ExperimentKind::Nash: experiments.push_back("nash"); break;
            case ExperimentKind::Competitive: experiments.push_back("competitive"); break;
            case ExperimentKind::CryptoLink: experiments.push_back("crypto-link"); break;
            case ExperimentKind::Replication:
                experiments.push_back(json{{"replication", e.replications}});
                break;
        }
    }
    json root{
        {"schema_version", s.schema_version},
        {"market", market},
        {"solver",
         {{"damping", s.solver.opts.damping},
          {"tol", s.solver.opts.tol},
          {"foc_tol", s.solver.opts.foc_tol},
          {"max_iter", s.solver.opts.max_iter},
          {"mode", s.solver.opts.mode == SweepMode::GaussSeidel ? "gauss-seidel" : "jacobi"},
          {"seed", s.solver.seed}}},
        {"crypto", {{"S", s.crypto.S}, {"v", s.crypto.v}, {"state_scalings", s.crypto.state_scalings}}},
        {"experiments", experiments},
    };
    return root.dump(2) + "\n";
}

namespace {

std::string agent_name(int i, const MarketConfig& cfg) {
    return i < cfg.M ? "standard_" + std::to_string(i) : "producer_" + std::to_string(i - cfg.M);
}

}  // namespace

int run_scenario(const ScenarioFile& scenario, const std::filesystem::path& out_dir,
                 const RunOverrides& overrides) {
    const auto t_start = std::chrono::steady_clock::now();
    ScenarioFile sc = scenario;
    json recorded_overrides = json::object();
    if (overrides.tol) {
        sc.solver.opts.tol = *overrides.tol;
        recorded_overrides["tol"] = *overrides.tol;
    }
    if (overrides.damping) {
        sc.solver.opts.damping = *overrides.damping;
        recorded_overrides["damping"] = *overrides.damping;
    }
    if (overrides.max_iter) {
        sc.solver.opts.max_iter = *overrides.max_iter;
        recorded_overrides["max_iter"] = *overrides.max_iter;
    }
    if (overrides.mode) {
        sc.solver.opts.mode = *overrides.mode;
        recorded_overrides["mode"] =
            *overrides.mode == SweepMode::GaussSeidel ? "gauss-seidel" : "jacobi";
    }
    if (overrides.seed) {
        sc.solver.seed = *overrides.seed;
        recorded_overrides["seed"] = *overrides.seed;
    }
    if (!overrides.experiments.empty()) {
        std::ostringstream arr;
        arr << "[";
        for (std::size_t i = 0; i < overrides.experiments.size(); ++i)
            arr << (i ? "," : "") << '"' << overrides.experiments[i] << '"';
        arr << "]";
        sc.experiments = parse_experiments(json::parse(arr.str()));
        recorded_overrides["experiments"] = overrides.experiments;
    }

    std::filesystem::create_directories(out_dir);
    bool all_converged = true;
    json meta;
    meta["schema_version"] = sc.schema_version;
    meta["config_hash"] = [&] {
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a(scenario_to_json(sc))));
        return std::string(buf);
    }();
    meta["seed"] = sc.solver.seed;
    meta["overrides"] = recorded_overrides;
    json experiment_meta = json::object();

    std::optional<EquilibriumResult> nash;
    auto need_nash = [&] {
        if (!nash) nash = solve_nash(sc.market, std::nullopt, sc.solver.opts);
        return *nash;
    };

    for (const auto& exp : sc.experiments) {
        switch (exp.kind) {
            case ExperimentKind::Nash: {
                auto eq = need_nash();
                all_converged = all_converged && eq.converged;
                experiment_meta["nash"] = {{"converged", eq.converged},
                                           {"iterations", eq.iterations},
                                           {"trivial", eq.trivial},
                                           {"max_strategy_change", eq.max_strategy_change}};
                std::ostringstream prices_csv;
                prices_csv << "period,price\n";
                prices_csv << "0," << fmt(eq.prices.p0) << "\n";
                for (int t = 0; t < sc.market.T; ++t)
                    prices_csv << (t + 1) << "," << fmt(eq.prices.p[t]) << "\n";
                write_atomic(out_dir / "prices.csv", prices_csv.str());

                std::ostringstream alloc_csv;
                alloc_csv << "agent,good,quantity\n";
                for (int i = 0; i < sc.market.num_agents(); ++i) {
                    for (int t = 0; t < sc.market.T; ++t)
                        alloc_csv << csv_quote(agent_name(i, sc.market)) << ",electricity_"
                                  << (t + 1) << "," << fmt(eq.allocations.x[i][t]) << "\n";
                    alloc_csv << csv_quote(agent_name(i, sc.market)) << ",numeraire,"
                              << fmt(eq.allocations.x0[i]) << "\n";
                }
                write_atomic(out_dir / "allocations.csv", alloc_csv.str());

                json foc = json::object();
                for (int i = 0; i < sc.market.num_agents(); ++i) {
                    const auto& r = eq.foc_reports[i];
                    foc[agent_name(i, sc.market)] = {
                        {"lambda", r.lambda},
                        {"mu", r.mu},
                        {"stationarity_residuals", r.stationarity_residuals},
                        {"complementary_slackness", r.complementary_slackness},
                        {"max_residual", r.max_residual},
                        {"boundary", r.boundary},
                        {"barrier", r.barrier}};
                }
                write_atomic(out_dir / "foc_report.json", foc.dump(2) + "\n");
                break;
            }
            case ExperimentKind::Competitive: {
                auto bench = competitive_benchmark(sc.market);
                experiment_meta["competitive"] = {
                    {"excess_demand_residual", bench.excess_demand_residual}};
                std::ostringstream csv;
                csv << "period,price\n";
                csv << "0," << fmt(1.0) << "\n";
                for (int t = 0; t < sc.market.T; ++t)
                    csv << (t + 1) << "," << fmt(bench.p[t]) << "\n";
                write_atomic(out_dir / "competitive_prices.csv", csv.str());
                break;
            }
            case ExperimentKind::Replication: {
                auto rows = convergence_experiment(sc.market, exp.replications, sc.solver.opts);
                std::ostringstream csv;
                csv << "n,gap,converged\n";
                bool ok = true;
                for (const auto& row : rows) {
                    csv << row.n << "," << fmt(row.gap) << "," << (row.converged ? 1 : 0) << "\n";
                    ok = ok && row.converged;
                }
                all_converged = all_converged && ok;
                experiment_meta["replication"] = {{"rows", rows.size()}, {"converged", ok}};
                write_atomic(out_dir / "replication.csv", csv.str());
                break;
            }
            case ExperimentKind::CryptoLink: {
                auto eq = need_nash();
                if (!eq.converged) {
                    all_converged = false;
                    experiment_meta["crypto-link"] = {{"skipped", "equilibrium not converged"}};
                    break;
                }
                auto link = link_to_market(eq, sc.market, sc.crypto.v, sc.crypto.state_scalings);
                std::ostringstream csv;
                csv << "agent,state,E,V,lambda\n";
                for (int i = 0; i < sc.market.num_agents(); ++i)
                    for (int s = 0; s < sc.crypto.S; ++s) {
                        const auto& e = link.allocation.entries[i][s];
                        csv << csv_quote(agent_name(i, sc.market)) << "," << s << ","
                            << fmt(e.E) << "," << fmt(e.V) << "," << fmt(e.lambda) << "\n";
                    }
                write_atomic(out_dir / "crypto.csv", csv.str());
                auto summary = verification_overhead_report(link.allocation);
                json js = json::array();
                for (std::size_t s = 0; s < summary.size(); ++s)
                    js.push_back({{"state", s},
                                  {"total_E", summary[s].total_E},
                                  {"total_V", summary[s].total_V},
                                  {"overhead_ratio", summary[s].overhead_ratio},
                                  {"abstained", summary[s].abstained}});
                experiment_meta["crypto-link"] = {{"states", js}};
                break;
            }
        }
    }

    if (nash) experiment_meta["nash_iterations"] = nash->iterations;
    meta["experiments"] = experiment_meta;
    meta["converged"] = all_converged;
    meta["wall_time_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - t_start)
                               .count();
    write_atomic(out_dir / "run_meta.json", meta.dump(2) + "\n");
    return all_converged ? 0 : 2;
}

}  // namespace emg
