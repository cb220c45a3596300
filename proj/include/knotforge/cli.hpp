#pragma once

// Pieces behind the command-line tool: JSON exports, goal sets, the
// evaluation harness with CSV/SVG output, training schedules, and the
// scripted knot demos.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "knotforge/config.hpp"
#include "knotforge/demo_scripts.hpp"

namespace knotforge {

// ---- enumeration / plans ----

inline KindSet parse_kind_set(const std::string& text) {
    KindSet ks{0};
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        ks = ks.with(parse_move_kind(tok));
    }
    if (ks.bits == 0) throw ParseError("empty move-kind list");
    return ks;
}

inline nlohmann::json graph_to_json(const HighLevelGraph& g) {
    nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array(), layers = nlohmann::json::object();
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        nodes.push_back({{"id", i}, {"state", to_string(g.nodes[i])}, {"crossings", g.nodes[i].crossings()}});
    for (const auto& e : g.edges)
        edges.push_back({{"source", e.source}, {"target", e.target}, {"action", describe(e.action)}});
    for (const auto& [phi, ids] : g.layers) layers[std::to_string(phi)] = ids.size();
    return {{"max_phi", g.max_phi}, {"layer_sizes", layers}, {"nodes", nodes}, {"edges", edges}};
}

inline nlohmann::json to_json_value(const Plan& p) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : p.steps)
        steps.push_back({{"source", to_string(s.source)}, {"action", describe(s.action)}, {"target", to_string(s.target)}});
    return {{"goal", to_string(p.goal)}, {"length", p.size()}, {"steps", steps}};
}

inline nlohmann::json plans_to_json(const std::vector<Plan>& ps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : ps) arr.push_back(to_json_value(p));
    return {{"plans", arr}};
}

// ---- training schedule ----

/// Lines "<key> <steps>", '#' comments; e.g. "C/0 200000".
inline std::vector<std::pair<AgentKey, long>> parse_schedule(const std::string& text) {
    std::vector<std::pair<AgentKey, long>> out;
    std::stringstream ss(text);
    std::string line;
    int ln = 0;
    while (std::getline(ss, line)) {
        ++ln;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::stringstream ls(line);
        std::string key;
        long steps = 0;
        if (!(ls >> key)) continue;
        if (!(ls >> steps) || steps <= 0) throw ParseError("schedule line " + std::to_string(ln) + ": expected '<key> <steps>'");
        out.push_back({parse_agent_key(key), steps});
    }
    if (out.empty()) throw ParseError("schedule is empty");
    return out;
}

/// Pools holding only the straight rope (the unknot).
inline ConfigPool<RopeConfig> initial_pools(const AppConfig& c) {
    ConfigPool<RopeConfig> pools(c.train.pool_capacity, 0x9001);
    pools.insert(TopoState{}, make_straight_rope(c.rope));
    return pools;
}

// ---- goal sets ----

struct GoalSet {
    std::string name;
    std::vector<TopoState> goals;
    std::string provenance;
};

inline nlohmann::json to_json_value(const GoalSet& s) {
    nlohmann::json goals = nlohmann::json::array();
    for (std::size_t i = 0; i < s.goals.size(); ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "g%03zu", i);
        goals.push_back({{"id", id}, {"state", to_string(s.goals[i])}, {"crossings", s.goals[i].crossings()}});
    }
    return {{"name", s.name}, {"provenance", s.provenance}, {"goals", goals}};
}

inline GoalSet goalset_from_json(const nlohmann::json& j) {
    try {
        GoalSet s;
        s.name = j.at("name").get<std::string>();
        s.provenance = j.value("provenance", "");
        for (const auto& g : j.at("goals")) s.goals.push_back(parse_topo_state(g.at("state").get<std::string>()));
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("goal set: ") + e.what());
    }
}

inline std::string goal_id(std::size_t i) {
    char id[16];
    std::snprintf(id, sizeof id, "g%03zu", i);
    return id;
}

inline const char* kTrefoilCode = "O1+ U2+ O3+ U1+ O2+ U3+";
// Expected final state of figure8_script(): coloring determinant 5, no R1/R2 reduction.
inline const char* kFigureEightCode = "O1+ U2+ O3+ U4+ O2+ U1+ U3+ O4+";

/// k uniformly sampled states from each drawn-crossing layer 1..max_phi,
/// optionally followed by the trefoil and the scripted figure-8 state.
inline GoalSet make_goalset(int max_phi, int sample_k, std::uint64_t seed, bool include_named, std::string name = "",
                            const AppConfig& cfg = {}) {
    if (max_phi < 1 || max_phi > kMaxEnumerationPhi)
        throw InvalidConfig("goal set max_phi must be in [1, " + std::to_string(kMaxEnumerationPhi) + "]");
    if (sample_k < 1) throw InvalidConfig("goal set sample size must be >= 1");
    const auto g = enumerate_graph(max_phi);
    std::mt19937_64 rng(seed);
    GoalSet s;
    s.name = name.empty() ? "phi<=" + std::to_string(max_phi) + "_k" + std::to_string(sample_k) : std::move(name);
    s.provenance = "uniform sample of " + std::to_string(sample_k) +
                   " states per drawn-crossing layer of the enumerated move graph, seed " + std::to_string(seed) +
                   (include_named ? "; plus the trefoil and the figure-8 state from the scripted demo" : "");
    std::set<std::string> seen;
    auto push = [&](const TopoState& t) {
        if (seen.insert(to_string(t)).second) s.goals.push_back(t);
    };
    for (int phi = 1; phi <= max_phi; ++phi) {
        auto it = g.layers.find(phi);
        if (it == g.layers.end()) continue;
        std::vector<int> ids = it->second;
        std::sort(ids.begin(), ids.end(), [&](int a, int b) { return to_string(g.nodes[a]) < to_string(g.nodes[b]); });
        std::shuffle(ids.begin(), ids.end(), rng);
        ids.resize(std::min<std::size_t>(ids.size(), static_cast<std::size_t>(sample_k)));
        std::sort(ids.begin(), ids.end(), [&](int a, int b) { return to_string(g.nodes[a]) < to_string(g.nodes[b]); });
        for (int id : ids) push(g.nodes[id]);
    }
    if (include_named) {
        push(parse_topo_state(kTrefoilCode));
        auto fig8 = run_demo(figure8_script(), cfg);
        if (!fig8.success) throw Error("figure-8 script diverged at step " + std::to_string(fig8.divergence_step));
        push(fig8.final_state);
    }
    return s;
}

// ---- evaluation ----

struct EvalRow {
    std::string goal_id;
    std::uint64_t seed = 0;
    bool success = false;
    double wall_time_s = 0;
    long curves_total = 0;
    double curves_per_transition = 0;
    int transitions = 0;
};

inline EvalRow eval_row(const std::string& goal_id, const RunResult& r) {
    return {goal_id, r.seed, r.success, r.wall_time_s, r.curves_total, r.curves_per_transition(), r.transitions};
}

struct EvalTable {
    std::vector<TopoState> goals;
    std::vector<EvalRow> rows;
    std::vector<RunResult> runs;

    double aggregate_success() const {
        if (rows.empty()) return 0.0;
        long n = 0;
        for (const auto& r : rows) n += r.success;
        return static_cast<double>(n) / static_cast<double>(rows.size());
    }
    /// Pooled over all successful transitions of all runs; 0 if there were none.
    double mean_curves_per_transition() const {
        long c = 0, t = 0;
        for (const auto& r : runs) {
            c += r.curves_in_transitions;
            t += r.transitions;
        }
        return t > 0 ? static_cast<double>(c) / t : 0.0;
    }
};

inline AgentRegistry random_registry(Variant v) {
    AgentRegistry r;
    r.set_fallback(RandomPolicy{});
    (void)v;
    return r;
}

template <class Env>
EvalTable evaluate_goalset(const Env& env, const typename Env::Config& q0, const GoalSet& set,
                           const AgentRegistry& agents, const RunConfig& rc, const EpisodeConfig& ecfg,
                           const std::vector<std::uint64_t>& seeds, const Clock& clock = steady_clock_seconds()) {
    EvalTable t;
    t.goals = set.goals;
    for (std::size_t i = 0; i < set.goals.size(); ++i)
        for (auto seed : seeds) {
            RunConfig r = rc;
            r.seed = seed;
            auto res = solve(env, q0, set.goals[i], agents, r, ecfg, clock);
            t.rows.push_back(eval_row(goal_id(i), res));
            t.runs.push_back(std::move(res));
        }
    return t;
}

inline const char* kResultsHeader = "goal_id,seed,success,wall_time_s,curves_total,curves_per_transition";

inline std::string results_csv(const std::vector<EvalRow>& rows) {
    std::string out = std::string(kResultsHeader) + "\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%llu,%d,%.6f,%ld,%.6f\n", r.goal_id.c_str(),
                      static_cast<unsigned long long>(r.seed), r.success ? 1 : 0, r.wall_time_s, r.curves_total,
                      r.curves_per_transition);
        out += buf;
    }
    return out;
}

inline std::vector<EvalRow> parse_results_csv(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line) || line != kResultsHeader) throw SchemaError("results CSV: bad header");
    std::vector<EvalRow> rows;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 6) throw SchemaError("results CSV: expected 6 fields in '" + line + "'");
        try {
            EvalRow r;
            r.goal_id = f[0];
            r.seed = std::stoull(f[1]);
            if (f[2] != "0" && f[2] != "1") throw SchemaError("results CSV: success must be 0 or 1");
            r.success = f[2] == "1";
            r.wall_time_s = std::stod(f[3]);
            r.curves_total = std::stol(f[4]);
            r.curves_per_transition = std::stod(f[5]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw SchemaError("results CSV: bad number in '" + line + "'");
        }
    }
    return rows;
}

inline std::string anytime_csv(const std::vector<AnytimeRow>& rows) {
    std::string out = "t_s,success_rate\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", r.t, r.success_rate);
        out += buf;
    }
    return out;
}

inline std::vector<AnytimeRow> parse_anytime_csv(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line) || line != "t_s,success_rate") throw SchemaError("anytime CSV: bad header");
    std::vector<AnytimeRow> rows;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        const auto c = line.find(',');
        if (c == std::string::npos) throw SchemaError("anytime CSV: bad row '" + line + "'");
        try {
            rows.push_back({std::stod(line.substr(0, c)), std::stod(line.substr(c + 1))});
        } catch (const std::logic_error&) {
            throw SchemaError("anytime CSV: bad number in '" + line + "'");
        }
    }
    return rows;
}

/// Step-function line plot of cumulative success against time.
inline std::string anytime_svg(const std::vector<AnytimeRow>& rows, const std::string& title = "cumulative success") {
    const double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
    double tmax = 1;
    for (const auto& r : rows) tmax = std::max(tmax, r.t);
    auto X = [&](double t) { return L + (W - L - R) * t / tmax; };
    auto Y = [&](double s) { return H - B - (H - T - B) * s; };
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(2);
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << Y(0) << "\" x2=\"" << W - R << "\" y2=\"" << Y(0) << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << Y(0) << "\" x2=\"" << L << "\" y2=\"" << Y(1) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double s = i / 4.0;
        o << "<text x=\"" << L - 6 << "\" y=\"" << Y(s) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
          << static_cast<int>(100 * s) << "%</text>\n";
        o << "<text x=\"" << X(tmax * s) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
          << tmax * s << "</text>\n";
    }
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">runtime (s)</text>\n";
    o << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    double prev = 0;
    bool first = true;
    for (const auto& r : rows) {
        if (!first) o << X(r.t) << "," << Y(prev) << " ";
        o << X(r.t) << "," << Y(r.success_rate) << " ";
        prev = r.success_rate;
        first = false;
    }
    o << "\"/>\n</svg>\n";
    return o.str();
}

inline std::string per_goal_csv(const EvalTable& t) {
    std::string out = "goal_id,state,runs,successes,success_rate\n";
    for (std::size_t i = 0; i < t.goals.size(); ++i) {
        const std::string id = goal_id(i);
        int n = 0, k = 0;
        for (const auto& r : t.rows)
            if (r.goal_id == id) {
                ++n;
                k += r.success;
            }
        char buf[64];
        std::snprintf(buf, sizeof buf, ",%d,%d,%.6f\n", n, k, n ? static_cast<double>(k) / n : 0.0);
        out += id + "," + to_string(t.goals[i]) + buf;
    }
    return out;
}

inline void write_eval_outputs(const EvalTable& t, double time_cap, const std::string& dir) {
    auto put = [&](const std::string& name, const std::string& text) {
        std::ofstream f(std::filesystem::path(dir) / name);
        if (!f) throw Error("cannot write " + name + " in " + dir);
        f << text;
    };
    put("results.csv", results_csv(t.rows));
    put("per_goal.csv", per_goal_csv(t));
    const auto curve = anytime_curve(t.runs, linear_grid(time_cap, 101));
    const std::string csv = anytime_csv(curve);
    put("anytime.csv", csv);
    put("anytime.svg", anytime_svg(parse_anytime_csv(csv)));
    char buf[160];
    std::snprintf(buf, sizeof buf, "{\"runs\": %zu, \"aggregate_success\": %.6f, \"mean_curves_per_transition\": %.6f}\n",
                  t.rows.size(), t.aggregate_success(), t.mean_curves_per_transition());
    put("summary.json", buf);
}

// ---- demo ----

/// Runs the overhand script; see demo_scripts.hpp.
inline DemoLog demo_overhand(const AppConfig& c = {}) { return run_demo(overhand_script(), c); }

}  // namespace knotforge
