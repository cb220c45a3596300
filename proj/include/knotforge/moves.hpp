#pragma once

// Complexity-increasing Reidemeister moves on Gauss codes and bounded
// enumeration of the high-level graph.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "knotforge/error.hpp"
#include "knotforge/topology.hpp"

namespace knotforge {

enum class MoveKind : std::uint8_t { R1 = 0, R2 = 1, Cross = 2 };
enum class RopeEnd : std::uint8_t { Head = 0, Tail = 1 };

inline const char* to_string(MoveKind k) {
    switch (k) {
        case MoveKind::R1: return "R1";
        case MoveKind::R2: return "R2";
        case MoveKind::Cross: return "Cross";
    }
    return "?";
}

inline MoveKind parse_move_kind(const std::string& s) {
    if (s == "R1") return MoveKind::R1;
    if (s == "R2") return MoveKind::R2;
    if (s == "Cross") return MoveKind::Cross;
    throw ParseError("unknown move kind '" + s + "'");
}

/// Bit set over MoveKind.
struct KindSet {
    std::uint8_t bits = 0b111;

    static KindSet all() { return {0b111}; }
    static KindSet only(MoveKind k) { return {static_cast<std::uint8_t>(1u << static_cast<int>(k))}; }
    bool contains(MoveKind k) const { return bits & (1u << static_cast<int>(k)); }
    KindSet with(MoveKind k) const { return {static_cast<std::uint8_t>(bits | (1u << static_cast<int>(k)))}; }
};

/// Arcs are insertion gaps of the source code: 0 is before the first passage,
/// code length is after the last.
///   R1:    arc, over (= over passage first), sign
///   R2:    arc, arc2, over (= strand at `arc` is the over strand)
///   Cross: end, arc, over (= the end passes over), sign
struct HighLevelAction {
    MoveKind kind = MoveKind::R1;
    RopeEnd end = RopeEnd::Head;
    int arc = 0;
    int arc2 = 0;
    bool over = true;
    int sign = +1;

    auto key() const {
        return std::make_tuple(static_cast<int>(kind), kind == MoveKind::Cross ? static_cast<int>(end) : 0, arc,
                               kind == MoveKind::R2 ? arc2 : 0, over ? 0 : 1, kind == MoveKind::R2 ? 0 : -sign);
    }
    bool operator==(const HighLevelAction& o) const { return key() == o.key(); }
    bool operator<(const HighLevelAction& o) const { return key() < o.key(); }
};

inline HighLevelAction make_r1(int arc, bool over_first, int sign) {
    return {MoveKind::R1, RopeEnd::Head, arc, 0, over_first, sign};
}
inline HighLevelAction make_r2(int arc_i, int arc_j, bool first_over) {
    return {MoveKind::R2, RopeEnd::Head, arc_i, arc_j, first_over, +1};
}
inline HighLevelAction make_cross(RopeEnd end, int arc, bool over, int sign) {
    return {MoveKind::Cross, end, arc, 0, over, sign};
}

/// Descriptor used in JSON exports and tie-breaks, e.g. `R1(0,O,+)`,
/// `R2(0,2,O)`, `Cross(H,3,U,-)`.
inline std::string describe(const HighLevelAction& a) {
    const char* sg = a.sign > 0 ? "+" : "-";
    const char* ov = a.over ? "O" : "U";
    switch (a.kind) {
        case MoveKind::R1: return "R1(" + std::to_string(a.arc) + "," + ov + "," + sg + ")";
        case MoveKind::R2: return "R2(" + std::to_string(a.arc) + "," + std::to_string(a.arc2) + "," + ov + ")";
        case MoveKind::Cross:
            return std::string("Cross(") + (a.end == RopeEnd::Head ? "H" : "T") + "," + std::to_string(a.arc) + "," + ov + "," +
                   sg + ")";
    }
    return "?";
}

inline HighLevelAction parse_action(const std::string& text) {
    auto open = text.find('('), close = text.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw ParseError("bad action descriptor '" + text + "'");
    MoveKind kind = parse_move_kind(text.substr(0, open));
    std::vector<std::string> f;
    std::string cur;
    for (char ch : text.substr(open + 1, close - open - 1)) {
        if (ch == ',') {
            f.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    f.push_back(cur);
    auto num = [&](const std::string& s) {
        if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
            throw ParseError("bad arc in '" + text + "'");
        return std::stoi(s);
    };
    auto flag = [&](const std::string& s) {
        if (s == "O") return true;
        if (s == "U") return false;
        throw ParseError("bad over flag in '" + text + "'");
    };
    auto sgn = [&](const std::string& s) {
        if (s == "+") return 1;
        if (s == "-") return -1;
        throw ParseError("bad sign in '" + text + "'");
    };
    switch (kind) {
        case MoveKind::R1:
            if (f.size() != 3) throw ParseError("R1 takes 3 fields: '" + text + "'");
            return make_r1(num(f[0]), flag(f[1]), sgn(f[2]));
        case MoveKind::R2:
            if (f.size() != 3) throw ParseError("R2 takes 3 fields: '" + text + "'");
            return make_r2(num(f[0]), num(f[1]), flag(f[2]));
        case MoveKind::Cross:
            if (f.size() != 4 || (f[0] != "H" && f[0] != "T")) throw ParseError("bad Cross descriptor '" + text + "'");
            return make_cross(f[0] == "H" ? RopeEnd::Head : RopeEnd::Tail, num(f[1]), flag(f[2]), sgn(f[3]));
    }
    throw ParseError("bad action descriptor '" + text + "'");
}

inline bool action_valid_for(const TopoState& s, const HighLevelAction& a) {
    const int len = static_cast<int>(s.code.size());
    if (a.arc < 0 || a.arc > len) return false;
    if (a.kind == MoveKind::R2 && (a.arc2 < 0 || a.arc2 > len)) return false;
    if (a.kind != MoveKind::R2 && a.sign != 1 && a.sign != -1) return false;
    return true;
}

/// T: S x A -> S. R1 and Cross add one crossing, R2 adds two of opposite sign.
/// An R2 with equal arcs places the over strand's pair first in that gap.
inline TopoState apply_move(const TopoState& s, const HighLevelAction& a) {
    if (!action_valid_for(s, a)) throw InvalidMove("action " + describe(a) + " invalid for code of length " +
                                                   std::to_string(s.code.size()));
    const int fresh = s.crossings() + 1;
    std::vector<Passage> c = s.code;
    switch (a.kind) {
        case MoveKind::R1: {
            Passage first{fresh, a.over ? Role::Over : Role::Under, a.sign};
            Passage second{fresh, opposite(first.role), a.sign};
            c.insert(c.begin() + a.arc, {first, second});
            break;
        }
        case MoveKind::Cross: {
            Passage at_end{fresh, a.over ? Role::Over : Role::Under, a.sign};
            Passage partner{fresh, opposite(at_end.role), a.sign};
            c.insert(c.begin() + a.arc, partner);
            if (a.end == RopeEnd::Head)
                c.insert(c.begin(), at_end);
            else
                c.push_back(at_end);
            break;
        }
        case MoveKind::R2: {
            const int pa = fresh, pb = fresh + 1;
            const Role ri = a.over ? Role::Over : Role::Under;
            const Role rj = opposite(ri);
            std::vector<Passage> strand_i{{pa, ri, +1}, {pb, ri, -1}};
            std::vector<Passage> strand_j{{pb, rj, -1}, {pa, rj, +1}};
            if (a.arc == a.arc2) {
                strand_i.insert(strand_i.end(), strand_j.begin(), strand_j.end());
                c.insert(c.begin() + a.arc, strand_i.begin(), strand_i.end());
            } else if (a.arc < a.arc2) {
                c.insert(c.begin() + a.arc2, strand_j.begin(), strand_j.end());
                c.insert(c.begin() + a.arc, strand_i.begin(), strand_i.end());
            } else {
                c.insert(c.begin() + a.arc, strand_i.begin(), strand_i.end());
                c.insert(c.begin() + a.arc2, strand_j.begin(), strand_j.end());
            }
            break;
        }
    }
    return canonicalize(TopoState{std::move(c)});
}

/// Every parameter instantiation of the requested kinds, in a fixed order.
inline std::vector<HighLevelAction> legal_moves(const TopoState& s, KindSet kinds = KindSet::all()) {
    std::vector<HighLevelAction> out;
    const int len = static_cast<int>(s.code.size());
    if (kinds.contains(MoveKind::R1))
        for (int arc = 0; arc <= len; ++arc)
            for (bool over : {true, false})
                for (int sign : {+1, -1}) out.push_back(make_r1(arc, over, sign));
    if (kinds.contains(MoveKind::R2))
        for (int i = 0; i <= len; ++i)
            for (int j = 0; j <= len; ++j)
                for (bool over : {true, false}) out.push_back(make_r2(i, j, over));
    if (kinds.contains(MoveKind::Cross))
        for (RopeEnd end : {RopeEnd::Head, RopeEnd::Tail})
            for (int arc = 0; arc <= len; ++arc)
                for (bool over : {true, false})
                    for (int sign : {+1, -1}) out.push_back(make_cross(end, arc, over, sign));
    return out;
}

inline int crossing_increment(MoveKind k) { return k == MoveKind::R2 ? 2 : 1; }

struct GraphEdge {
    int source = 0;
    HighLevelAction action;
    int target = 0;
};

/// Nodes are canonical codes; layers group nodes by drawn crossing count.
struct HighLevelGraph {
    int max_phi = 0;
    std::vector<TopoState> nodes;
    std::unordered_map<TopoState, int, TopoStateHash> index;
    std::vector<GraphEdge> edges;
    std::vector<std::vector<int>> out_edges;
    std::map<int, std::vector<int>> layers;

    std::optional<int> find(const TopoState& s) const {
        auto it = index.find(s);
        if (it == index.end()) return std::nullopt;
        return it->second;
    }
};

inline constexpr int kMaxEnumerationPhi = 4;

/// Breadth-first closure of the unknot under legal moves, keeping states
/// with at most `max_phi` drawn crossings.
inline HighLevelGraph enumerate_graph(int max_phi, KindSet kinds = KindSet::all()) {
    if (max_phi < 0 || max_phi > kMaxEnumerationPhi)
        throw InvalidMove("enumerate_graph: max_phi must be in [0, " + std::to_string(kMaxEnumerationPhi) + "]");
    HighLevelGraph g;
    g.max_phi = max_phi;
    auto add_node = [&](TopoState s) {
        auto [it, inserted] = g.index.try_emplace(s, static_cast<int>(g.nodes.size()));
        if (inserted) {
            g.layers[s.crossings()].push_back(it->second);
            g.nodes.push_back(std::move(s));
            g.out_edges.emplace_back();
        }
        return it->second;
    };
    add_node(TopoState{});
    for (std::size_t head = 0; head < g.nodes.size(); ++head) {
        const int src = static_cast<int>(head);
        if (g.nodes[src].crossings() >= max_phi) continue;
        for (const auto& a : legal_moves(g.nodes[src], kinds)) {
            if (g.nodes[src].crossings() + crossing_increment(a.kind) > max_phi) continue;
            TopoState t = apply_move(g.nodes[src], a);
            const int tgt = add_node(std::move(t));
            g.out_edges[src].push_back(static_cast<int>(g.edges.size()));
            g.edges.push_back({src, a, tgt});
        }
    }
    return g;
}

}  // namespace knotforge
