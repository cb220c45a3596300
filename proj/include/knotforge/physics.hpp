#pragma once

// Position-based dynamics rope: inextensible links, capsule self-collision,
// frictional table contact, and the grab-lift-move-lower curve primitive.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "knotforge/rope.hpp"

namespace knotforge {

struct SimParams {
    double substep_dt = 0.002;
    double gravity = 9.81;
    int solver_iterations = 20;
    double friction_coeff = 0.3;
    double damping = 0.995;
    double effector_speed = 0.5;
    double settle_speed_eps = 1e-3;
    int settle_window = 50;
    int max_substeps = 20000;
    /// Planar jitter applied at grab time; 0 disables it.
    double jitter_scale = 1e-5;

    bool operator==(const SimParams&) const = default;
};

inline void validate(const SimParams& sp) {
    if (!(sp.substep_dt > 0) || !(sp.gravity > 0) || sp.solver_iterations <= 0 || !(sp.friction_coeff > 0) ||
        !(sp.damping > 0) || !(sp.effector_speed > 0) || !(sp.settle_speed_eps > 0) || sp.settle_window < 2 ||
        sp.max_substeps <= 0 || sp.jitter_scale < 0)
        throw InvalidConfig("invalid sim params");
}

struct SimState {
    RopeConfig config;
    std::vector<Vec3> velocities;
    std::optional<int> grabbed;
};

struct StepResult {
    RopeConfig config;
    int substeps = 0;
    bool settled = false;
};

/// (x_start, y_start, 0) -> (x_start, y_start, z_max) -> (x, y, z_max) -> (x, y, 0),
/// with the start at the planar midpoint of the grabbed link.
inline std::array<Vec3, 4> waypoints(const RopeConfig& q, const Curve& c) {
    const Vec3 m = link_midpoint(q, c.link);
    return {Vec3(m.x(), m.y(), 0.0), Vec3(m.x(), m.y(), c.z_max), Vec3(c.x, c.y, c.z_max), Vec3(c.x, c.y, 0.0)};
}

namespace detail {

// Closest points between segments p1p2 and q1q2 (parameters s, t in [0,1]).
inline double closest_segment_params(const Vec3& p1, const Vec3& p2, const Vec3& q1, const Vec3& q2, double& s, double& t) {
    const Vec3 d1 = p2 - p1, d2 = q2 - q1, r = p1 - q1;
    const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
    const double c = d1.dot(r), b = d1.dot(d2);
    const double denom = a * e - b * b;
    s = denom > 1e-14 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
    t = (b * s + f) / e;
    if (t < 0) {
        t = 0;
        s = std::clamp(-c / a, 0.0, 1.0);
    } else if (t > 1) {
        t = 1;
        s = std::clamp((b - c) / a, 0.0, 1.0);
    }
    return ((p1 + s * d1) - (q1 + t * d2)).norm();
}

}  // namespace detail

/// Minimum 3D distance between any two non-adjacent links.
inline double min_nonadjacent_clearance(const std::vector<Vec3>& pos) {
    double best = std::numeric_limits<double>::infinity();
    const int n_seg = static_cast<int>(pos.size()) - 1;
    for (int i = 0; i < n_seg; ++i)
        for (int j = i + 2; j < n_seg; ++j) {
            double s, t;
            best = std::min(best, detail::closest_segment_params(pos[i], pos[i + 1], pos[j], pos[j + 1], s, t));
        }
    return best;
}

/// Largest relative deviation of a link length from the rest length.
inline double max_link_strain(const std::vector<Vec3>& pos, double link_length) {
    double worst = 0;
    for (std::size_t k = 0; k + 1 < pos.size(); ++k)
        worst = std::max(worst, std::abs((pos[k + 1] - pos[k]).norm() - link_length) / link_length);
    return worst;
}

class RopeSimulator {
public:
    RopeSimulator(const RopeConfig& q, const SimParams& sp)
        : rope_(q.params), sp_(sp), pos_(q.positions), prev_(q.positions), vel_(q.positions.size(), Vec3::Zero()),
          inv_mass_(q.positions.size(), 1.0) {}

    const std::vector<Vec3>& positions() const { return pos_; }
    const std::vector<Vec3>& velocities() const { return vel_; }
    std::vector<Vec3>& mutable_velocities() { return vel_; }
    std::optional<int> grabbed() const { return grabbed_; }

    SimState state() const { return {config(), vel_, grabbed_}; }
    RopeConfig config() const { return make_config(rope_, pos_); }

    double kinetic_energy() const {
        double e = 0;
        for (std::size_t i = 0; i < vel_.size(); ++i)
            if (inv_mass_[i] > 0) e += 0.5 * vel_[i].squaredNorm();
        return e;
    }

    double max_speed() const {
        double m = 0;
        for (const auto& v : vel_) m = std::max(m, v.squaredNorm());
        return std::sqrt(m);
    }

    void jitter(std::uint64_t seed) {
        if (sp_.jitter_scale <= 0) return;
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-sp_.jitter_scale, sp_.jitter_scale);
        for (auto& p : pos_) {
            p.x() += u(rng);
            p.y() += u(rng);
        }
        prev_ = pos_;
    }

    /// Rigidly pins link `link` (1-based) by its midpoint.
    void grab(int link) {
        grabbed_ = link;
        const Vec3 mid = 0.5 * (pos_[link - 1] + pos_[link]);
        grip_offset_[0] = pos_[link - 1] - mid;
        grip_offset_[1] = pos_[link] - mid;
        inv_mass_[link - 1] = 0;
        inv_mass_[link] = 0;
        effector_ = mid;
    }

    void release() {
        if (!grabbed_) return;
        inv_mass_[*grabbed_ - 1] = 1;
        inv_mass_[*grabbed_] = 1;
        grabbed_.reset();
    }

    void set_effector(const Vec3& e) { effector_ = e; }
    const Vec3& effector() const { return effector_; }

    /// Clearance between the grabbed link and every link not adjacent to it.
    double grabbed_clearance() const {
        if (!grabbed_) return std::numeric_limits<double>::infinity();
        const int g = *grabbed_ - 1;
        const int n_seg = static_cast<int>(pos_.size()) - 1;
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n_seg; ++j) {
            if (std::abs(j - g) < 2) continue;
            double s, t;
            best = std::min(best, detail::closest_segment_params(pos_[g], pos_[g + 1], pos_[j], pos_[j + 1], s, t));
        }
        return best;
    }

    void substep() {
        const double dt = sp_.substep_dt;
        const std::size_t n = pos_.size();
        for (std::size_t i = 0; i < n; ++i) {
            prev_[i] = pos_[i];
            if (inv_mass_[i] == 0) continue;
            vel_[i].z() -= sp_.gravity * dt;
            vel_[i] *= sp_.damping;
            pos_[i] += vel_[i] * dt;
        }
        if (grabbed_) {
            pos_[*grabbed_ - 1] = effector_ + grip_offset_[0];
            pos_[*grabbed_] = effector_ + grip_offset_[1];
        }
        double moved = 0;
        for (std::size_t i = 0; i < n; ++i) moved = std::max(moved, (pos_[i] - prev_[i]).squaredNorm());
        collect_candidates(2.0 * std::sqrt(moved) + 2e-3);
        for (int it = 0; it < sp_.solver_iterations; ++it) project_constraints();
        const double r = rope_.rope_radius;
        for (std::size_t i = 0; i < n; ++i) {
            vel_[i] = (pos_[i] - prev_[i]) / dt;
            if (inv_mass_[i] > 0 && pos_[i].z() <= r + 1e-6) {
                vel_[i].x() *= 1.0 - sp_.friction_coeff;
                vel_[i].y() *= 1.0 - sp_.friction_coeff;
            }
        }
    }

    /// Extra constraint passes with no integration; removes solver residue.
    void polish(int passes) {
        collect_candidates(2e-3);
        for (int it = 0; it < passes; ++it) project_constraints();
    }

private:
    // Pairs that can come within contact distance during this substep; the
    // margin must cover the largest joint displacement of the substep.
    void collect_candidates(double margin) {
        candidates_.clear();
        const int n_seg = static_cast<int>(pos_.size()) - 1;
        const double reach = 2.0 * rope_.rope_radius + margin;
        seg_lo_.resize(n_seg);
        seg_hi_.resize(n_seg);
        for (int i = 0; i < n_seg; ++i) {
            seg_lo_[i] = pos_[i].cwiseMin(pos_[i + 1]);
            seg_hi_[i] = pos_[i].cwiseMax(pos_[i + 1]);
        }
        for (int i = 0; i < n_seg; ++i)
            for (int j = i + 2; j < n_seg; ++j) {
                if ((seg_lo_[j].array() - seg_hi_[i].array() > reach).any()) continue;
                if ((seg_lo_[i].array() - seg_hi_[j].array() > reach).any()) continue;
                candidates_.emplace_back(i, j);
            }
    }

    void project_constraints() {
        const double L = rope_.link_length;
        const int n_seg = static_cast<int>(pos_.size()) - 1;
        for (int k = 0; k < n_seg; ++k) {
            const double w1 = inv_mass_[k], w2 = inv_mass_[k + 1];
            const double wsum = w1 + w2;
            if (wsum == 0) continue;
            Vec3 d = pos_[k + 1] - pos_[k];
            const double len = d.norm();
            if (len < 1e-12) continue;
            const Vec3 corr = (len - L) / (len * wsum) * d;
            pos_[k] += w1 * corr;
            pos_[k + 1] -= w2 * corr;
        }
        const double min_dist = 2.0 * rope_.rope_radius;
        for (const auto& [i, j] : candidates_) {
            double s, t;
            const double dist = detail::closest_segment_params(pos_[i], pos_[i + 1], pos_[j], pos_[j + 1], s, t);
            if (dist >= min_dist) continue;
            const Vec3 pi = pos_[i] + s * (pos_[i + 1] - pos_[i]);
            const Vec3 pj = pos_[j] + t * (pos_[j + 1] - pos_[j]);
            Vec3 nrm = pi - pj;
            if (dist > 1e-9)
                nrm /= dist;
            else
                nrm = pi.z() >= pj.z() ? Vec3::UnitZ() : Vec3(-Vec3::UnitZ());
            const double a0 = (1 - s) * inv_mass_[i], a1 = s * inv_mass_[i + 1];
            const double b0 = (1 - t) * inv_mass_[j], b1 = t * inv_mass_[j + 1];
            const double wsum = (1 - s) * a0 + s * a1 + (1 - t) * b0 + t * b1;
            if (wsum <= 0) continue;
            const double lambda = (min_dist - dist) / wsum;
            pos_[i] += a0 * lambda * nrm;
            pos_[i + 1] += a1 * lambda * nrm;
            pos_[j] -= b0 * lambda * nrm;
            pos_[j + 1] -= b1 * lambda * nrm;
        }
        const double r = rope_.rope_radius;
        for (std::size_t i = 0; i < pos_.size(); ++i)
            if (inv_mass_[i] > 0 && pos_[i].z() < r) pos_[i].z() = r;
    }

    RopeParams rope_;
    SimParams sp_;
    std::vector<Vec3> pos_, prev_, vel_;
    std::vector<double> inv_mass_;
    std::optional<int> grabbed_;
    std::array<Vec3, 2> grip_offset_{Vec3::Zero(), Vec3::Zero()};
    Vec3 effector_ = Vec3::Zero();
    std::vector<std::pair<int, int>> candidates_;
    std::vector<Vec3> seg_lo_, seg_hi_;
};

/// f: Q x C -> Q. Grabs the link midpoint, follows the waypoints at
/// effector speed, releases (early if the lowered link touches another
/// link), then simulates until every joint is slower than settle_speed_eps
/// for settle_window substeps or max_substeps is reached.
inline StepResult step_curve(const RopeConfig& q, const Curve& c, const SimParams& sp, std::uint64_t seed) {
    validate(q.params, c);
    const RopeParams& rp = q.params;
    RopeSimulator sim(q, sp);
    sim.jitter(seed);

    const Vec3 start = 0.5 * (sim.positions()[c.link - 1] + sim.positions()[c.link]);
    const double lift = std::max(c.z_max, start.z());
    const std::array<Vec3, 4> path{start, Vec3(start.x(), start.y(), lift), Vec3(c.x, c.y, lift),
                                   Vec3(c.x, c.y, rp.rope_radius)};
    std::array<double, 3> seg_len{};
    for (int k = 0; k < 3; ++k) seg_len[k] = (path[k + 1] - path[k]).norm();

    sim.grab(c.link);
    const double step_len = sp.effector_speed * sp.substep_dt;
    int seg = 0;
    double along = 0;
    int substeps = 0;
    while (sim.grabbed() && substeps < sp.max_substeps) {
        along += step_len;
        while (seg < 3 && along >= seg_len[seg]) {
            along -= seg_len[seg];
            ++seg;
        }
        if (seg >= 3) {
            sim.set_effector(path[3]);
        } else {
            const Vec3 dir = seg_len[seg] > 0 ? Vec3((path[seg + 1] - path[seg]) / seg_len[seg]) : Vec3::Zero();
            sim.set_effector(path[seg] + along * dir);
        }
        sim.substep();
        ++substeps;
        if (seg >= 3) sim.release();
        else if (seg == 2 && sim.grabbed_clearance() < 2.0 * rp.rope_radius * 1.02)
            sim.release();
    }
    sim.release();

    int calm = 0;
    bool settled = false;
    while (substeps < sp.max_substeps) {
        sim.substep();
        ++substeps;
        calm = sim.max_speed() < sp.settle_speed_eps ? calm + 1 : 0;
        if (calm >= sp.settle_window) {
            settled = true;
            break;
        }
    }
    sim.polish(4 * sp.solver_iterations);
    return {sim.config(), substeps, settled};
}

}  // namespace knotforge
