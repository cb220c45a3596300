#pragma once

// Agent variants (G, A, C, AC), their keys, and goal/start selection for
// training.

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "knotforge/episode.hpp"
#include "knotforge/pool.hpp"

namespace knotforge {

enum class Variant { G, A, C, AC };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::G: return "G";
        case Variant::A: return "A";
        case Variant::C: return "C";
        case Variant::AC: return "AC";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "G") return Variant::G;
    if (s == "A") return Variant::A;
    if (s == "C") return Variant::C;
    if (s == "AC") return Variant::AC;
    throw ParseError("unknown variant '" + s + "' (expected G, A, C or AC)");
}

/// G: (); A: (kind); C: (phi); AC: (kind, phi). phi is the source's drawn
/// crossing count, the same quantity that layers the high-level graph.
struct AgentKey {
    Variant variant = Variant::G;
    std::optional<MoveKind> kind;
    std::optional<int> phi;

    bool operator==(const AgentKey&) const = default;
    bool operator<(const AgentKey& o) const { return name() < o.name(); }

    /// "G", "A/R2", "C/0", "AC/Cross/1".
    std::string name() const {
        std::string s = to_string(variant);
        if (kind) s += std::string("/") + knotforge::to_string(*kind);
        if (phi) s += "/" + std::to_string(*phi);
        return s;
    }
    /// Name usable as a file stem.
    std::string file_stem() const {
        std::string s = name();
        for (auto& c : s)
            if (c == '/') c = '_';
        return s;
    }
};

inline AgentKey parse_agent_key(const std::string& text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == '/' || c == '_') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    AgentKey k;
    k.variant = parse_variant(parts[0]);
    auto num = [&](const std::string& s) {
        if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
            throw ParseError("bad crossing number in agent key '" + text + "'");
        return std::stoi(s);
    };
    const std::size_t expect = k.variant == Variant::G ? 1 : k.variant == Variant::AC ? 3 : 2;
    if (parts.size() != expect) throw ParseError("bad agent key '" + text + "'");
    if (k.variant == Variant::A || k.variant == Variant::AC) k.kind = parse_move_kind(parts[1]);
    if (k.variant == Variant::C) k.phi = num(parts[1]);
    if (k.variant == Variant::AC) k.phi = num(parts[2]);
    return k;
}

inline AgentKey registry_lookup(Variant v, const TransitionGoal& g) {
    AgentKey k;
    k.variant = v;
    if (v == Variant::A || v == Variant::AC) k.kind = g.action.kind;
    if (v == Variant::C || v == Variant::AC) k.phi = g.source.crossings();
    return k;
}

/// Transitions out of `source` (within the graph's bound) handled by `key`.
inline std::vector<TransitionGoal> eligible_transitions(const HighLevelGraph& graph, const TopoState& source,
                                                        const AgentKey& key) {
    std::vector<TransitionGoal> out;
    auto id = graph.find(source);
    if (!id) return out;
    for (int e : graph.out_edges[*id]) {
        const auto& edge = graph.edges[e];
        TransitionGoal g{graph.nodes[edge.source], edge.action, graph.nodes[edge.target]};
        if (registry_lookup(key.variant, g) == key) out.push_back(std::move(g));
    }
    return out;
}

/// Uniform over the key's transitions whose source pool is non-empty, then
/// uniform over that pool.
template <class Config>
std::pair<TransitionGoal, Config> select_goal_and_start(const ConfigPool<Config>& pools, const AgentKey& key,
                                                        const HighLevelGraph& graph, std::mt19937_64& rng) {
    std::vector<TransitionGoal> all;
    for (const auto& s : pools.nonempty_states()) {
        auto t = eligible_transitions(graph, s, key);
        all.insert(all.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
    }
    if (all.empty()) throw Error("no eligible transition with a pooled start for agent " + key.name());
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    TransitionGoal g = all[pick(rng)];
    const auto& items = *pools.find(g.source);
    std::uniform_int_distribution<std::size_t> pick_q(0, items.size() - 1);
    return {std::move(g), items[pick_q(rng)]};
}

}  // namespace knotforge
