#pragma once

// Top: Q -> S. Rope geometry to signed Gauss code of the open curve, plus
// canonical labelling, Reidemeister reductions and crossing-number estimates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "knotforge/error.hpp"
#include "knotforge/rope.hpp"

namespace knotforge {

enum class Role : std::uint8_t { Over, Under };

inline Role opposite(Role r) { return r == Role::Over ? Role::Under : Role::Over; }

struct Passage {
    int crossing = 0;
    Role role = Role::Over;
    int sign = +1;

    bool operator==(const Passage&) const = default;
};

/// P-data: passages listed from head to tail. Canonical when crossing ids
/// are 1, 2, 3, ... in order of first encounter.
struct TopoState {
    std::vector<Passage> code;

    int crossings() const { return static_cast<int>(code.size()) / 2; }
    bool empty() const { return code.empty(); }
    bool operator==(const TopoState&) const = default;
};

inline std::string to_string(const TopoState& s) {
    std::string out;
    for (std::size_t i = 0; i < s.code.size(); ++i) {
        if (i) out += ' ';
        const auto& p = s.code[i];
        out += p.role == Role::Over ? 'O' : 'U';
        out += std::to_string(p.crossing);
        out += p.sign > 0 ? '+' : '-';
    }
    return out;
}

/// Empty when the code satisfies the pairing invariants.
inline std::optional<std::string> code_violation(const TopoState& s) {
    std::map<int, std::vector<Passage>> by_id;
    for (const auto& p : s.code) {
        if (p.sign != 1 && p.sign != -1) return "sign must be +1 or -1";
        by_id[p.crossing].push_back(p);
    }
    for (const auto& [id, ps] : by_id) {
        if (ps.size() != 2) return "crossing " + std::to_string(id) + " must appear exactly twice";
        if (ps[0].role == ps[1].role) return "crossing " + std::to_string(id) + " needs one Over and one Under passage";
        if (ps[0].sign != ps[1].sign) return "crossing " + std::to_string(id) + " has inconsistent signs";
    }
    return std::nullopt;
}

inline bool is_canonical(const TopoState& s) {
    int next = 1;
    std::unordered_set<int> seen;
    for (const auto& p : s.code) {
        if (seen.insert(p.crossing).second) {
            if (p.crossing != next) return false;
            ++next;
        }
    }
    return true;
}

inline TopoState canonicalize(TopoState s) {
    std::unordered_map<int, int> relabel;
    for (auto& p : s.code) {
        auto [it, inserted] = relabel.try_emplace(p.crossing, static_cast<int>(relabel.size()) + 1);
        p.crossing = it->second;
    }
    return s;
}

/// Parses `O1+ U2+ ...`. Labels are canonicalized; canonical input prints
/// back identically.
inline TopoState parse_topo_state(const std::string& text) {
    TopoState s;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        if (tok.size() < 3) throw ParseError("bad passage token '" + tok + "'");
        Passage p;
        if (tok[0] == 'O')
            p.role = Role::Over;
        else if (tok[0] == 'U')
            p.role = Role::Under;
        else
            throw ParseError("passage must start with O or U: '" + tok + "'");
        char sc = tok.back();
        if (sc == '+')
            p.sign = 1;
        else if (sc == '-')
            p.sign = -1;
        else
            throw ParseError("passage must end with + or -: '" + tok + "'");
        std::string digits = tok.substr(1, tok.size() - 2);
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
            throw ParseError("bad crossing id in '" + tok + "'");
        p.crossing = std::stoi(digits);
        if (p.crossing < 1) throw ParseError("crossing ids start at 1: '" + tok + "'");
        s.code.push_back(p);
    }
    if (auto v = code_violation(s)) throw ParseError(*v);
    return canonicalize(std::move(s));
}

inline bool states_equal(const TopoState& a, const TopoState& b) { return a.code == b.code; }

struct TopoStateHash {
    std::size_t operator()(const TopoState& s) const {
        std::size_t h = 1469598103934665603ull;
        for (const auto& p : s.code) {
            std::size_t v = static_cast<std::size_t>(p.crossing) * 4 + (p.role == Role::Over ? 0 : 2) + (p.sign > 0 ? 0 : 1);
            h = (h ^ v) * 1099511628211ull;
        }
        return h;
    }
};

// ---------------------------------------------------------------------------
// Geometry -> code

struct CrossingRecord {
    int id = 0;
    int over_segment = 0;
    int under_segment = 0;
    int sign = +1;
    Eigen::Vector2d planar_point = Eigen::Vector2d::Zero();
    double over_param = 0;   // position along the over segment, in [0,1]
    double under_param = 0;
};

struct TopologyOptions {
    double endpoint_tolerance = 1e-5;
    double min_crossing_angle_deg = 1.0;
    double jitter_scale = 1e-4;
};

namespace detail {

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    Eigen::Vector2d ab = b - a;
    double l2 = ab.squaredNorm();
    double t = l2 > 0 ? std::clamp((p - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
    return (a + t * ab - p).norm();
}

inline double segment_distance_2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                                  const Eigen::Vector2d& d) {
    return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d), point_segment_distance(c, a, b),
                     point_segment_distance(d, a, b)});
}

// Returns false when the projection is degenerate.
inline bool find_crossings_once(std::span<const Vec3> pts, const TopologyOptions& opt, std::vector<CrossingRecord>& out) {
    out.clear();
    const int n_seg = static_cast<int>(pts.size()) - 1;
    const double sin_min = std::sin(opt.min_crossing_angle_deg * 3.14159265358979323846 / 180.0);
    const double tol = opt.endpoint_tolerance;
    for (int i = 0; i < n_seg; ++i) {
        const Eigen::Vector2d a = pts[i].head<2>(), b = pts[i + 1].head<2>();
        const Eigen::Vector2d r = b - a;
        const double len_r = r.norm();
        const double minx_i = std::min(a.x(), b.x()) - tol, maxx_i = std::max(a.x(), b.x()) + tol;
        const double miny_i = std::min(a.y(), b.y()) - tol, maxy_i = std::max(a.y(), b.y()) + tol;
        for (int j = i + 2; j < n_seg; ++j) {
            const Eigen::Vector2d c = pts[j].head<2>(), d = pts[j + 1].head<2>();
            if (std::max(c.x(), d.x()) < minx_i || std::min(c.x(), d.x()) > maxx_i) continue;
            if (std::max(c.y(), d.y()) < miny_i || std::min(c.y(), d.y()) > maxy_i) continue;
            const Eigen::Vector2d s = d - c;
            const double len_s = s.norm();
            if (len_r < tol || len_s < tol) return false;
            const double denom = cross2(r, s);
            const double tt = tol / len_r, tu = tol / len_s;
            if (std::abs(denom) < sin_min * len_r * len_s) {
                // Shallow crossings and near-overlaps are both degenerate.
                if (segment_distance_2d(a, b, c, d) < tol) return false;
                if (denom != 0) {
                    const double t = cross2(c - a, s) / denom, u = cross2(c - a, r) / denom;
                    if (t >= -tt && t <= 1 + tt && u >= -tu && u <= 1 + tu) return false;
                }
                continue;
            }
            const double t = cross2(c - a, s) / denom;
            const double u = cross2(c - a, r) / denom;
            if (t < -tt || t > 1 + tt || u < -tu || u > 1 + tu) continue;
            if (t < tt || t > 1 - tt || u < tu || u > 1 - tu) return false;
            const double zi = pts[i].z() + t * (pts[i + 1].z() - pts[i].z());
            const double zj = pts[j].z() + u * (pts[j + 1].z() - pts[j].z());
            if (std::abs(zi - zj) < 1e-9) return false;
            CrossingRecord rec;
            const bool i_over = zi > zj;
            rec.over_segment = i_over ? i : j;
            rec.under_segment = i_over ? j : i;
            rec.over_param = i_over ? t : u;
            rec.under_param = i_over ? u : t;
            const Eigen::Vector2d over_dir = i_over ? r : s, under_dir = i_over ? s : r;
            rec.sign = cross2(over_dir, under_dir) > 0 ? +1 : -1;
            rec.planar_point = a + t * r;
            out.push_back(rec);
        }
    }
    return true;
}

inline TopoState code_from_crossings(std::vector<CrossingRecord>& recs) {
    struct Event {
        double key;
        int rec;
        Role role;
    };
    std::vector<Event> ev;
    ev.reserve(2 * recs.size());
    for (int k = 0; k < static_cast<int>(recs.size()); ++k) {
        ev.push_back({recs[k].over_segment + recs[k].over_param, k, Role::Over});
        ev.push_back({recs[k].under_segment + recs[k].under_param, k, Role::Under});
    }
    std::sort(ev.begin(), ev.end(), [](const Event& x, const Event& y) { return x.key < y.key; });
    TopoState s;
    std::vector<int> label(recs.size(), 0);
    int next = 1;
    for (const auto& e : ev) {
        if (!label[e.rec]) label[e.rec] = next++;
        s.code.push_back({label[e.rec], e.role, recs[e.rec].sign});
    }
    for (std::size_t k = 0; k < recs.size(); ++k) recs[k].id = label[k];
    std::sort(recs.begin(), recs.end(), [](const CrossingRecord& x, const CrossingRecord& y) { return x.id < y.id; });
    return s;
}

}  // namespace detail

/// Crossing records (ids matching the returned code) for a joint polyline.
/// A degenerate projection is retried once with a seeded planar jitter.
inline std::pair<TopoState, std::vector<CrossingRecord>> top_with_crossings(std::span<const Vec3> positions,
                                                                            std::uint64_t seed = 0,
                                                                            const TopologyOptions& opt = {}) {
    std::vector<CrossingRecord> recs;
    if (detail::find_crossings_once(positions, opt, recs)) {
        TopoState s = detail::code_from_crossings(recs);
        return {std::move(s), std::move(recs)};
    }
    std::mt19937_64 rng(seed ^ 0x7f4a7c159e3779b9ull);
    std::uniform_real_distribution<double> jitter(-opt.jitter_scale, opt.jitter_scale);
    std::vector<Vec3> moved(positions.begin(), positions.end());
    for (auto& p : moved) {
        p.x() += jitter(rng);
        p.y() += jitter(rng);
    }
    if (detail::find_crossings_once(moved, opt, recs)) {
        TopoState s = detail::code_from_crossings(recs);
        return {std::move(s), std::move(recs)};
    }
    throw DegenerateDiagram("projection degenerate after jitter retry");
}

inline TopoState top(std::span<const Vec3> positions, std::uint64_t seed = 0, const TopologyOptions& opt = {}) {
    return top_with_crossings(positions, seed, opt).first;
}

/// Jitter seed derived from the coordinates, so Top(q) is a function of q.
inline std::uint64_t geometry_seed(std::span<const Vec3> positions) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : positions)
        for (int k = 0; k < 3; ++k) {
            std::uint64_t bits;
            const double v = p[k];
            std::memcpy(&bits, &v, sizeof bits);
            h = (h ^ bits) * 0x100000001b3ull;
        }
    return h;
}

inline TopoState top(const RopeConfig& q, const TopologyOptions& opt = {}) {
    return top(std::span<const Vec3>(q.positions), geometry_seed(q.positions), opt);
}

// ---------------------------------------------------------------------------
// Reductions

/// All states reachable by one R1- or R2-reduction, R1 first, in scan order.
/// R1: delete two adjacent passages of one crossing. R2: two adjacent
/// passages (a,b) sharing a role, matched elsewhere by an adjacent (b,a) or
/// (a,b) pair with the opposite role, and a, b of opposite sign.
inline std::vector<TopoState> one_step_reductions(const TopoState& s) {
    std::vector<TopoState> out;
    const auto& c = s.code;
    const int n = static_cast<int>(c.size());
    for (int k = 0; k + 1 < n; ++k) {
        if (c[k].crossing != c[k + 1].crossing) continue;
        TopoState r;
        r.code.reserve(n - 2);
        for (int i = 0; i < n; ++i)
            if (i != k && i != k + 1) r.code.push_back(c[i]);
        out.push_back(canonicalize(std::move(r)));
    }
    for (int k = 0; k + 1 < n; ++k) {
        const int a = c[k].crossing, b = c[k + 1].crossing;
        if (a == b || c[k].role != c[k + 1].role || c[k].sign == c[k + 1].sign) continue;
        for (int m = 0; m + 1 < n; ++m) {
            if (std::abs(m - k) < 2) continue;
            const int x = c[m].crossing, y = c[m + 1].crossing;
            const bool match = (x == b && y == a) || (x == a && y == b);
            if (!match || c[m].role != c[m + 1].role || c[m].role == c[k].role) continue;
            TopoState r;
            r.code.reserve(n - 4);
            for (const auto& p : c)
                if (p.crossing != a && p.crossing != b) r.code.push_back(p);
            out.push_back(canonicalize(std::move(r)));
        }
    }
    return out;
}

/// Greedy reduction to a fixpoint, always taking the first applicable
/// reduction.
inline TopoState reduce(TopoState s) {
    for (;;) {
        auto next = one_step_reductions(s);
        if (next.empty()) return s;
        s = std::move(next.front());
    }
}

struct CrossingNumber {
    int phi_hat = 0;
    bool exact = false;
    bool operator==(const CrossingNumber&) const = default;
};

/// Exhaustive search over reduction sequences up to `exact_bound` drawn
/// crossings; greedy upper bound above. Open-curve endpoint pulls are not
/// reductions here, so "exact" means exact over R1/R2 reachability.
inline CrossingNumber crossing_number(const TopoState& s, int exact_bound = 6) {
    if (s.crossings() > exact_bound) return {reduce(s).crossings(), false};
    int best = s.crossings();
    std::unordered_set<TopoState, TopoStateHash> seen{s};
    std::vector<TopoState> stack{s};
    while (!stack.empty() && best > 0) {
        TopoState cur = std::move(stack.back());
        stack.pop_back();
        best = std::min(best, cur.crossings());
        for (auto& r : one_step_reductions(cur))
            if (seen.insert(r).second) stack.push_back(std::move(r));
    }
    return {best, true};
}

}  // namespace knotforge
