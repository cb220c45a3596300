// Offline search for the demo curve scripts: depth-first over stages,
// sampling curves near the rope ends and keeping those whose diagram makes
// exactly one symbolic move toward the target. Prints the frozen script.
//
//   demo_search overhand [tries] [seed]
//   demo_search figure8  [tries] [seed] [prefix]
//
// figure8 replays the first `prefix` overhand stages before searching.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <string>

#include "knotforge/cli.hpp"

using namespace knotforge;

namespace {

/// |det| of the coloring matrix of the closed-up code.
long determinant(const TopoState& s) {
    const int n = s.crossings();
    if (n == 0) return 1;
    const int L = static_cast<int>(s.code.size());
    std::vector<int> arc_of(L);
    int first_under = -1;
    for (int i = 0; i < L; ++i)
        if (s.code[i].role == Role::Under) {
            first_under = i;
            break;
        }
    int arc = 0;
    for (int k = 1; k <= L; ++k) {
        const int i = (first_under + k) % L;
        arc_of[i] = arc;
        if (s.code[i].role == Role::Under) arc = (arc + 1) % n;
    }
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < L; ++i) {
        if (s.code[i].role != Role::Under) continue;
        const int c = s.code[i].crossing - 1;
        int over = -1;
        for (int j = 0; j < L; ++j)
            if (s.code[j].crossing == c + 1 && s.code[j].role == Role::Over) over = arc_of[j];
        const int in = arc_of[i];
        const int out = arc_of[(i + 1) % L];
        m[c][over] += 2;
        m[c][in] -= 1;
        m[c][out] -= 1;
    }
    // minor without last row/column
    const int k = n - 1;
    double det = 1;
    std::vector<std::vector<double>> a(k, std::vector<double>(k));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) a[i][j] = m[i][j];
    for (int c = 0; c < k; ++c) {
        int p = c;
        for (int r = c + 1; r < k; ++r)
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        if (std::abs(a[p][c]) < 1e-12) return 0;
        if (p != c) {
            std::swap(a[p], a[c]);
            det = -det;
        }
        det *= a[c][c];
        for (int r = c + 1; r < k; ++r) {
            const double f = a[r][c] / a[c][c];
            for (int j = c; j < k; ++j) a[r][j] -= f * a[c][j];
        }
    }
    return std::lround(std::abs(det));
}

std::optional<HighLevelAction> move_between(const TopoState& a, const TopoState& b) {
    for (const auto& m : legal_moves(a))
        if (states_equal(apply_move(a, m), b)) return m;
    return std::nullopt;
}

struct Found {
    HighLevelAction action;
    std::vector<ScriptedCurve> curves;
    RopeConfig q;
    TopoState s;
};

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

}  // namespace

int main(int argc, char** argv) {
    const std::string which = argc > 1 ? argv[1] : "overhand";
    const int tries = argc > 2 ? std::atoi(argv[2]) : 400;
    std::mt19937_64 rng(argc > 3 ? std::stoull(argv[3]) : 1);
    const AppConfig cfg;
    const TopoState trefoil = parse_topo_state(kTrefoilCode);
    const int depth_cap = which == "overhand" ? 3 : 4;
    std::cerr << "det(trefoil) = " << determinant(trefoil) << "\n";

    auto is_target = [&](const TopoState& s) {
        if (which == "overhand") return states_equal(s, trefoil);
        // a kinked 3-crossing code can have the same determinant
        return s.crossings() == 4 && determinant(s) == 5 && reduce(s).crossings() == 4;
    };
    // Can a target still be reached with the stages left?
    std::function<bool(const TopoState&, int)> reachable = [&](const TopoState& s, int left) -> bool {
        if (is_target(s)) return true;
        if (left == 0 || s.crossings() >= 4) return false;
        for (const auto& m : legal_moves(s))
            if (reachable(apply_move(s, m), left - 1)) return true;
        return false;
    };
    std::vector<Found> path;
    auto promising = [&](const TopoState& s) {
        if (which == "overhand") return !plans_from(s, trefoil, KindSet::all(), 1).empty();
        return reachable(s, depth_cap - static_cast<int>(path.size()) - 1);
    };

    // A stage may use a few curves that keep the state (reshaping the rope)
    // before the one that makes the move.
    struct Shaped {
        RopeConfig q;
        std::vector<ScriptedCurve> curves;
    };
    std::function<bool(const RopeConfig&, const TopoState&)> dfs = [&](const RopeConfig& q, const TopoState& s) -> bool {
        if (is_target(s)) return true;
        if (static_cast<int>(path.size()) >= depth_cap) return false;
        std::vector<Found> hits;
        std::vector<Shaped> shaped{{q, {}}};
        std::uniform_real_distribution<double> u01(0, 1), uz(0.03, 0.25);
        const int max_hits = path.empty() ? 12 : 6;
        for (int t = 0; t < tries && static_cast<int>(hits.size()) < max_hits; ++t) {
            std::uniform_int_distribution<std::size_t> pick(0, shaped.size() - 1);
            const Shaped base = shaped[pick(rng)];
            double lo = 1e9, hi = -1e9, ylo = 1e9, yhi = -1e9;
            for (const auto& p : base.q.positions) {
                lo = std::min(lo, p.x());
                hi = std::max(hi, p.x());
                ylo = std::min(ylo, p.y());
                yhi = std::max(yhi, p.y());
            }
            std::uniform_real_distribution<double> ux(lo - 0.3, hi + 0.3), uy(ylo - 0.35, yhi + 0.35);
            std::uniform_int_distribution<int> end_link(0, 5), any_link(1, base.q.params.n_links);
            int link = u01(rng) < 0.6 ? (std::array<int, 6>{1, 2, 3, 28, 29, 30})[end_link(rng)] : any_link(rng);
            double x = ux(rng), y = uy(rng);
            if (u01(rng) < 0.5) {  // just past some strand
                std::uniform_int_distribution<std::size_t> joint(0, base.q.positions.size() - 1);
                std::normal_distribution<double> off(0.0, 0.08);
                const Vec3& p = base.q.positions[joint(rng)];
                x = p.x() + off(rng);
                y = p.y() + off(rng);
            }
            Curve c{link, round3(std::clamp(x, -0.99, 0.99)), round3(std::clamp(y, -0.99, 0.99)), round3(uz(rng))};
            auto r = step_curve(base.q, c, cfg.sim, 0);
            if (!r.settled) continue;
            TopoState s2;
            try {
                s2 = top(r.config, cfg.topology);
            } catch (const DegenerateDiagram&) {
                continue;
            }
            auto curves = base.curves;
            curves.push_back({c, 0});
            if (states_equal(s2, s)) {
                if (curves.size() < 3 && shaped.size() < 40) shaped.push_back({r.config, curves});
                continue;
            }
            if (s2.crossings() <= s.crossings() || !promising(s2)) continue;
            auto m = move_between(s, s2);
            if (!m) continue;
            bool dup = false;
            for (const auto& h : hits) dup = dup || states_equal(h.s, s2);
            if (dup && !path.empty()) continue;
            hits.push_back({*m, curves, r.config, s2});
            std::cerr << std::string(2 * path.size(), ' ') << "depth " << path.size() << ": " << to_string(s2)
                      << " via " << describe(*m) << " in " << curves.size() << " curves (try " << t << ")\n";
        }
        for (const auto& h : hits) {
            path.push_back(h);
            if (dfs(h.q, h.s)) return true;
            path.pop_back();
        }
        return false;
    };

    RopeConfig q0 = make_straight_rope(cfg.rope);
    TopoState s0{};
    const int prefix = argc > 4 ? std::atoi(argv[4]) : 0;
    if (prefix > 0) {
        DemoScript pre = overhand_script();
        pre.stages.resize(prefix);
        const DemoLog log = run_demo(pre, cfg);
        if (!log.success) {
            std::cerr << "prefix diverged\n";
            return 1;
        }
        for (int i = 0; i < prefix; ++i) path.push_back({pre.stages[i].action, pre.stages[i].curves, {}, log.plan_states[i + 1]});
        q0 = log.final_config;
        s0 = log.final_state;
    }
    if (!dfs(q0, s0)) {
        std::cerr << "no script found\n";
        return 1;
    }
    std::cout << "    // " << which << ": " << to_string(path.back().s) << "\n";
    for (const auto& f : path) {
        std::printf("    s.stages.push_back({parse_action(\"%s\"), {", describe(f.action).c_str());
        for (std::size_t i = 0; i < f.curves.size(); ++i)
            std::printf("%s{{%d, %.3f, %.3f, %.3f}, %llu}", i ? ", " : "", f.curves[i].curve.link, f.curves[i].curve.x,
                        f.curves[i].curve.y, f.curves[i].curve.z_max,
                        static_cast<unsigned long long>(f.curves[i].seed));
        std::printf("}});  // -> %s\n", to_string(f.s).c_str());
    }
    return 0;
}
