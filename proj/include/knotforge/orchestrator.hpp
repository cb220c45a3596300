#pragma once

// Inference loop: plan, pick a node of the reachable tree, dispatch the agent
// for the next transition, run the episode, grow the tree, re-plan.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "knotforge/agents.hpp"
#include "knotforge/planner.hpp"
#include "knotforge/rope_json.hpp"
#include "knotforge/sac.hpp"

namespace knotforge {

struct RunConfig {
    double time_cap = 1800.0;
    double epsilon = 0.05;
    int max_plans = 8;
    long max_episodes = 0;  // 0: no limit besides the time cap
    /// Failures of the same (state, action) before it is treated as infeasible.
    int infeasible_after = 3;
    Variant variant = Variant::C;
    std::uint64_t seed = 0;
};

inline void validate(const RunConfig& c) {
    if (!(c.time_cap > 0)) throw InvalidConfig("run.time_cap must be positive");
    if (!(c.epsilon >= 0 && c.epsilon < 1)) throw InvalidConfig("run.epsilon must be in [0, 1)");
    if (c.max_plans < 1) throw InvalidConfig("run.max_plans must be >= 1");
    if (c.max_episodes < 0) throw InvalidConfig("run.max_episodes must be >= 0");
    if (c.infeasible_after < 1) throw InvalidConfig("run.infeasible_after must be >= 1");
}

using PolicyFn = std::function<Action(const std::vector<double>&, const GoalEncoding&, std::mt19937_64&)>;

class AgentRegistry {
public:
    void add(const AgentKey& key, PolicyFn p) { agents_[key] = std::move(p); }
    bool contains(const AgentKey& key) const { return agents_.count(key) > 0; }
    const PolicyFn& at(const AgentKey& key) const {
        auto it = agents_.find(key);
        if (it != agents_.end()) return it->second;
        if (fallback_) return fallback_;
        throw Error("no agent for key " + key.name());
    }
    /// Policy used for keys without a dedicated agent.
    void set_fallback(PolicyFn p) { fallback_ = std::move(p); }
    std::vector<AgentKey> keys() const {
        std::vector<AgentKey> out;
        for (const auto& [k, v] : agents_) out.push_back(k);
        return out;
    }
    std::size_t size() const { return agents_.size(); }

    /// Every <key>.policy file in `dir` whose key belongs to `variant`.
    static AgentRegistry load(const std::string& dir, Variant variant) {
        AgentRegistry r;
        if (!std::filesystem::is_directory(dir)) throw Error("agent directory " + dir + " does not exist");
        for (const auto& e : std::filesystem::directory_iterator(dir)) {
            if (e.path().extension() != ".policy") continue;
            SacPolicy p = load_policy(e.path().string());
            AgentKey k = parse_agent_key(p.key);
            if (k.variant != variant) continue;
            r.add(k, [p = std::move(p)](const std::vector<double>& o, const GoalEncoding& g, std::mt19937_64& rng) {
                return p(o, g, rng);
            });
        }
        return r;
    }

private:
    std::map<AgentKey, PolicyFn> agents_;
    PolicyFn fallback_;
};

template <class Config>
struct TreeNode {
    Config config;
    TopoState state;
    int parent = -1;
    int episode = -1;  // episode that produced the node, -1 for the root
    int step = -1;
    std::vector<Action> actions;  // actions from the parent's config to this one
    bool flagged = false;         // physics did not settle on the way here
};

/// Reachable configurations, indexed by topological state.
template <class Config>
class ReachTree {
public:
    template <class Env>
    int add(const Env& env, TreeNode<Config> n) {
        if (!states_equal(env.top(n.config), n.state))
            throw Error("reach tree: node state " + to_string(n.state) + " does not match Top of its configuration");
        nodes_.push_back(std::move(n));
        const int id = static_cast<int>(nodes_.size()) - 1;
        index_[nodes_.back().state].push_back(id);
        return id;
    }
    const TreeNode<Config>& operator[](int i) const { return nodes_[i]; }
    int size() const { return static_cast<int>(nodes_.size()); }
    bool contains(const TopoState& s) const { return index_.count(s) > 0; }
    const std::vector<int>& nodes_in(const TopoState& s) const {
        static const std::vector<int> none;
        auto it = index_.find(s);
        return it == index_.end() ? none : it->second;
    }
    const auto& index() const { return index_; }

    std::vector<int> path_to(int id) const {
        std::vector<int> out;
        for (int i = id; i >= 0; i = nodes_[i].parent) out.push_back(i);
        std::reverse(out.begin(), out.end());
        return out;
    }

private:
    std::vector<TreeNode<Config>> nodes_;
    std::unordered_map<TopoState, std::vector<int>, TopoStateHash> index_;
};

struct AnytimeEvent {
    double t = 0;
    TopoState state;
    long curves = 0;
};

struct EpisodeLog {
    int start_node = -1;
    TransitionGoal goal;
    std::string agent;
    bool random_policy = false;
    bool random_node = false;
    Outcome outcome = Outcome::Timeout;
    std::vector<Action> actions;
    std::vector<Curve> curves;
    std::vector<TopoState> states;
    std::vector<bool> settled;
    double t_start = 0, t_end = 0;
};

struct RunResult {
    TopoState goal;
    bool success = false;
    std::string failure_reason;
    double wall_time_s = 0;
    long curves_total = 0;
    int transitions = 0;  // successful episodes
    long curves_in_transitions = 0;
    std::vector<EpisodeLog> episodes;
    std::vector<AnytimeEvent> events;
    std::vector<int> goal_path;  // tree nodes from the root to the goal node
    std::uint64_t seed = 0;

    /// Mean curve count over successful episodes; 0 when none succeeded.
    double curves_per_transition() const {
        return transitions > 0 ? static_cast<double>(curves_in_transitions) / transitions : 0.0;
    }
};

/// Seconds since an arbitrary origin.
using Clock = std::function<double()>;

inline Clock steady_clock_seconds() {
    return [] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
    };
}

namespace detail {

struct Candidate {
    int node = -1;
    PlanStep step;
    std::size_t remaining = 0;
    int failures = 0;
};

struct ActionKey {
    std::string state, action;
    bool operator<(const ActionKey& o) const { return std::tie(state, action) < std::tie(o.state, o.action); }
};

}  // namespace detail

/// Runs the plan / execute / re-plan loop from `q0` until `goal` is reached,
/// the time cap expires, or (if set) the episode limit is hit.
template <class Env>
RunResult solve(const Env& env, const typename Env::Config& q0, const TopoState& goal, const AgentRegistry& agents,
                const RunConfig& rc, const EpisodeConfig& ecfg = {}, const Clock& clock = steady_clock_seconds()) {
    validate(rc);
    validate(ecfg);
    using Config = typename Env::Config;
    const double t0 = clock();
    RunResult res;
    res.goal = goal;
    res.seed = rc.seed;
    std::mt19937_64 rng(mix_seed(rc.seed, 0x501e));
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    ReachTree<Config> tree;
    TreeNode<Config> root;
    root.config = q0;
    root.state = env.top(q0);
    tree.add(env, root);
    res.events.push_back({0.0, root.state, 0});
    auto finish = [&](bool ok, std::string why) {
        res.success = ok;
        res.failure_reason = std::move(why);
        res.wall_time_s = clock() - t0;
        return res;
    };
    if (states_equal(root.state, goal)) {
        res.goal_path = {0};
        return finish(true, "");
    }

    std::unordered_map<TopoState, std::vector<Plan>, TopoStateHash> plan_cache;
    auto plans_for = [&](const TopoState& s) -> const std::vector<Plan>& {
        auto it = plan_cache.find(s);
        if (it != plan_cache.end()) return it->second;
        std::vector<Plan> ps;
        if (s.crossings() <= kMaxEnumerationPhi) ps = plans_from(s, goal, KindSet::all(), rc.max_plans);
        return plan_cache.emplace(s, std::move(ps)).first->second;
    };
    if (goal.crossings() > kMaxEnumerationPhi) return finish(false, "goal beyond the enumeration bound");
    if (plans_for(root.state).empty()) return finish(false, "no plan from the start state to the goal");

    std::map<detail::ActionKey, int> failures;
    auto fail_count = [&](const PlanStep& st) {
        auto it = failures.find({to_string(st.source), describe(st.action)});
        return it == failures.end() ? 0 : it->second;
    };

    long episode_index = 0;
    while (true) {
        if (clock() - t0 >= rc.time_cap) return finish(false, "time cap reached");
        if (rc.max_episodes > 0 && episode_index >= rc.max_episodes) return finish(false, "episode limit reached");

        // Candidates: each node's state, each first step of its plans.
        std::vector<detail::Candidate> cands;
        for (const auto& [state, ids] : tree.index()) {
            const auto& ps = plans_for(state);
            if (ps.empty()) continue;
            std::vector<PlanStep> firsts;
            for (const auto& p : ps) {
                if (p.empty()) continue;
                bool dup = false;
                for (const auto& f : firsts) dup = dup || (f.action == p.steps[0].action);
                if (!dup) firsts.push_back(p.steps[0]);
            }
            for (int id : ids)
                for (const auto& f : firsts) cands.push_back({id, f, ps.front().size(), fail_count(f)});
        }
        if (cands.empty()) return finish(false, "no reachable node has a plan to the goal");
        std::vector<detail::Candidate> feasible;
        for (const auto& c : cands)
            if (c.failures < rc.infeasible_after) feasible.push_back(c);
        if (feasible.empty()) {
            // Everything looks infeasible: forget and keep trying until the cap.
            failures.clear();
            feasible = cands;
        }

        detail::Candidate pick;
        const bool random_node = rc.epsilon > 0 && u01(rng) < rc.epsilon;
        if (random_node) {
            std::uniform_int_distribution<std::size_t> d(0, feasible.size() - 1);
            pick = feasible[d(rng)];
        } else {
            bool any_clean = false;
            for (const auto& c : feasible) any_clean = any_clean || !tree[c.node].flagged;
            const detail::Candidate* best = nullptr;
            for (const auto& c : feasible) {
                if (any_clean && tree[c.node].flagged) continue;
                if (!best || std::tie(c.remaining, c.failures) < std::tie(best->remaining, best->failures) ||
                    (c.remaining == best->remaining && c.failures == best->failures && c.node > best->node))
                    best = &c;
            }
            pick = *best;
        }

        const TransitionGoal g = TransitionGoal::make(pick.step.source, pick.step.action, pick.step.target);
        const AgentKey key = registry_lookup(rc.variant, g);
        const PolicyFn& policy = agents.at(key);
        const bool random_policy = rc.epsilon > 0 && u01(rng) < rc.epsilon;

        EpisodeLog log;
        log.start_node = pick.node;
        log.goal = g;
        log.agent = key.name();
        log.random_policy = random_policy;
        log.random_node = random_node;
        log.t_start = clock() - t0;
        const std::uint64_t ep_seed = mix_seed(rc.seed, 0x200000 + static_cast<std::uint64_t>(episode_index));
        ++episode_index;
        EpisodeTrace<Config> trace = random_policy
                                         ? run_episode(env, tree[pick.node].config, g, RandomPolicy{}, ecfg, ep_seed)
                                         : run_episode(env, tree[pick.node].config, g, policy, ecfg, ep_seed);
        log.t_end = clock() - t0;
        log.outcome = trace.outcome;

        int parent = pick.node;
        bool flagged = tree[pick.node].flagged;
        std::optional<int> goal_node;
        const int ep_id = static_cast<int>(res.episodes.size());
        for (std::size_t k = 0; k < trace.steps.size(); ++k) {
            const auto& st = trace.steps[k];
            log.actions.push_back(st.action);
            log.curves.push_back(env.curve(st.before, st.action));
            log.states.push_back(st.next);
            log.settled.push_back(st.settled);
            ++res.curves_total;
            if (st.degenerate) break;
            flagged = flagged || !st.settled;
            const bool fresh = !tree.contains(st.next);
            TreeNode<Config> n;
            n.config = st.after;
            n.state = st.next;
            n.parent = parent;
            n.episode = ep_id;
            n.step = static_cast<int>(k);
            n.actions = {st.action};
            n.flagged = flagged;
            parent = tree.add(env, std::move(n));
            if (fresh) res.events.push_back({clock() - t0, st.next, res.curves_total});
            if (states_equal(st.next, goal)) goal_node = parent;
        }
        if (trace.outcome == Outcome::Success) {
            ++res.transitions;
            res.curves_in_transitions += static_cast<long>(trace.steps.size());
        } else {
            ++failures[{to_string(pick.step.source), describe(pick.step.action)}];
        }
        res.episodes.push_back(std::move(log));
        if (goal_node) {
            res.goal_path = tree.path_to(*goal_node);
            return finish(true, "");
        }
    }
}

/// Cumulative success fraction on a time grid (step function, right-continuous).
struct AnytimeRow {
    double t = 0;
    double success_rate = 0;
};

inline std::vector<AnytimeRow> anytime_curve(const std::vector<RunResult>& results, const std::vector<double>& grid) {
    std::vector<double> times;
    for (const auto& r : results)
        if (r.success) times.push_back(r.wall_time_s);
    std::sort(times.begin(), times.end());
    std::vector<AnytimeRow> out;
    for (double t : grid) {
        const auto n = std::upper_bound(times.begin(), times.end(), t) - times.begin();
        out.push_back({t, results.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(results.size())});
    }
    return out;
}

inline std::vector<double> linear_grid(double t_max, int points) {
    std::vector<double> g;
    for (int i = 0; i < points; ++i) g.push_back(t_max * i / std::max(1, points - 1));
    return g;
}

inline nlohmann::json to_json_value(const Action& a) { return nlohmann::json(std::vector<double>(a.begin(), a.end())); }

inline nlohmann::json to_json_value(const RunResult& r) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : r.events) events.push_back({{"t", e.t}, {"state", to_string(e.state)}, {"curves", e.curves}});
    nlohmann::json eps = nlohmann::json::array();
    for (const auto& e : r.episodes) {
        nlohmann::json curves = nlohmann::json::array(), actions = nlohmann::json::array(),
                       states = nlohmann::json::array();
        for (const auto& c : e.curves) curves.push_back(to_json_value(c));
        for (const auto& a : e.actions) actions.push_back(to_json_value(a));
        for (const auto& s : e.states) states.push_back(to_string(s));
        eps.push_back({{"start_node", e.start_node},
                       {"source", to_string(e.goal.source)},
                       {"action", describe(e.goal.action)},
                       {"target", to_string(e.goal.target)},
                       {"agent", e.agent},
                       {"random_policy", e.random_policy},
                       {"random_node", e.random_node},
                       {"outcome", to_string(e.outcome)},
                       {"t_start", e.t_start},
                       {"t_end", e.t_end},
                       {"curves", curves},
                       {"actions", actions},
                       {"states", states},
                       {"settled", e.settled}});
    }
    return {{"goal", to_string(r.goal)},
            {"success", r.success},
            {"failure_reason", r.failure_reason},
            {"wall_time_s", r.wall_time_s},
            {"curves_total", r.curves_total},
            {"transitions", r.transitions},
            {"curves_per_transition", r.curves_per_transition()},
            {"seed", r.seed},
            {"goal_path", r.goal_path},
            {"anytime_events", events},
            {"episodes", eps}};
}

}  // namespace knotforge
