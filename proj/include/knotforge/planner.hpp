#pragma once

// Shortest increasing-move plans over the high-level graph.

#include <algorithm>
#include <deque>
#include <optional>
#include <unordered_map>
#include <vector>

#include "knotforge/moves.hpp"

namespace knotforge {

struct PlanStep {
    TopoState source;
    HighLevelAction action;
    TopoState target;
};

struct Plan {
    std::vector<PlanStep> steps;
    TopoState goal;

    std::size_t size() const { return steps.size(); }
    bool empty() const { return steps.empty(); }
};

/// Chain consistency, endpoint agreement and exact replay under apply_move.
inline bool plan_is_valid(const Plan& p, const TopoState& start) {
    TopoState cur = start;
    for (const auto& st : p.steps) {
        if (!states_equal(st.source, cur)) return false;
        if (!action_valid_for(cur, st.action)) return false;
        TopoState next = apply_move(cur, st.action);
        if (!states_equal(next, st.target)) return false;
        cur = std::move(next);
    }
    return states_equal(cur, p.goal);
}

/// Up to `max_plans` shortest plans from `current` to `goal`, each following a
/// distinct state sequence. Each step uses the smallest action (by
/// descriptor order) joining its two states; plans come out in lexicographic
/// order of their action sequences.
inline std::vector<Plan> plans_from(const TopoState& current, const TopoState& goal, KindSet kinds = KindSet::all(),
                                    int max_plans = 8, int bound = kMaxEnumerationPhi) {
    if (goal.crossings() > bound)
        throw PlanningError("goal has " + std::to_string(goal.crossings()) + " crossings, beyond the enumeration bound " +
                            std::to_string(bound));
    std::vector<Plan> out;
    if (max_plans <= 0) return out;
    if (states_equal(current, goal)) {
        out.push_back(Plan{{}, goal});
        return out;
    }
    if (current.crossings() >= goal.crossings()) return out;

    // Forward BFS restricted to states no larger than the goal.
    struct Node {
        TopoState state;
        int dist;
        std::vector<std::pair<HighLevelAction, int>> succ;  // smallest action per distinct successor
    };
    std::vector<Node> nodes;
    std::unordered_map<TopoState, int, TopoStateHash> index;
    nodes.push_back({current, 0, {}});
    index.emplace(current, 0);
    const int limit = goal.crossings();
    std::optional<int> goal_dist;
    for (std::size_t head = 0; head < nodes.size(); ++head) {
        const int u = static_cast<int>(head);
        if (goal_dist && nodes[u].dist >= *goal_dist) break;
        if (nodes[u].state.crossings() >= limit) continue;
        std::map<int, HighLevelAction> best;
        for (const auto& a : legal_moves(nodes[u].state, kinds)) {
            if (nodes[u].state.crossings() + crossing_increment(a.kind) > limit) continue;
            TopoState t = apply_move(nodes[u].state, a);
            auto [it, inserted] = index.try_emplace(t, static_cast<int>(nodes.size()));
            if (inserted) {
                const int d = nodes[u].dist + 1;
                if (states_equal(t, goal) && !goal_dist) goal_dist = d;
                nodes.push_back({std::move(t), d, {}});
            }
            const int v = it->second;
            if (nodes[v].dist != nodes[u].dist + 1) continue;
            auto b = best.find(v);
            if (b == best.end() || a < b->second) best[v] = a;
        }
        for (auto& [v, a] : best) nodes[u].succ.emplace_back(a, v);
        std::sort(nodes[u].succ.begin(), nodes[u].succ.end(),
                  [](const auto& x, const auto& y) { return x.first < y.first; });
    }
    auto git = index.find(goal);
    if (git == index.end()) return out;
    const int goal_id = git->second;
    const int depth = nodes[goal_id].dist;

    // Which nodes reach the goal along the shortest-path DAG.
    std::vector<char> reaches(nodes.size(), 0);
    reaches[goal_id] = 1;
    std::vector<int> order(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return nodes[x].dist > nodes[y].dist; });
    for (int u : order) {
        if (nodes[u].dist >= depth) continue;
        for (const auto& [a, v] : nodes[u].succ)
            if (reaches[v]) {
                reaches[u] = 1;
                break;
            }
    }

    std::vector<std::pair<HighLevelAction, int>> path;
    auto dfs = [&](auto&& self, int u) -> void {
        if (static_cast<int>(out.size()) >= max_plans) return;
        if (u == goal_id) {
            Plan p;
            p.goal = goal;
            int prev = 0;
            for (const auto& [a, v] : path) {
                p.steps.push_back({nodes[prev].state, a, nodes[v].state});
                prev = v;
            }
            out.push_back(std::move(p));
            return;
        }
        for (const auto& [a, v] : nodes[u].succ) {
            if (!reaches[v]) continue;
            path.emplace_back(a, v);
            self(self, v);
            path.pop_back();
            if (static_cast<int>(out.size()) >= max_plans) return;
        }
    };
    dfs(dfs, 0);
    for (const auto& p : out)
        if (!plan_is_valid(p, current)) throw PlanningError("internal: produced plan does not replay");
    return out;
}

/// Plans from the unknot. Empty when the goal is unreachable.
inline std::vector<Plan> plan_to(const TopoState& goal, KindSet kinds = KindSet::all(), int max_plans = 8,
                                 int bound = kMaxEnumerationPhi) {
    return plans_from(TopoState{}, goal, kinds, max_plans, bound);
}

inline std::optional<Plan> plan_from(const TopoState& current, const TopoState& goal, KindSet kinds = KindSet::all(),
                                     int bound = kMaxEnumerationPhi) {
    if (goal.crossings() > bound) return std::nullopt;
    auto ps = plans_from(current, goal, kinds, 1, bound);
    if (ps.empty()) return std::nullopt;
    return std::move(ps.front());
}

}  // namespace knotforge
