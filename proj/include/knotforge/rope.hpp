#pragma once

// Low-level rope state: joint positions, derived link orientations, and the
// curve primitive used to manipulate the rope.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "knotforge/error.hpp"

namespace knotforge {

using Vec3 = Eigen::Vector3d;

struct RopeParams {
    int n_links = 30;
    double link_length = 0.05;
    double rope_radius = 0.01;
    double workspace_half_extent = 1.0;
    double z_max_limit = 0.5;

    int n_joints() const { return n_links + 1; }
    int orientation_size() const { return 2 * (n_links - 1) + 7; }
    double rope_length() const { return n_links * link_length; }
    /// Index (0-based) of the link whose pose anchors the orientation vector.
    int middle_link() const { return n_links / 2; }

    bool operator==(const RopeParams&) const = default;
};

inline std::vector<std::string> param_violations(const RopeParams& p) {
    std::vector<std::string> out;
    if (p.n_links < 4) out.emplace_back("n_links must be >= 4");
    if (!(p.link_length > 0)) out.emplace_back("link_length must be positive");
    if (!(p.rope_radius > 0)) out.emplace_back("rope_radius must be positive");
    if (!(p.rope_radius < p.link_length)) out.emplace_back("rope_radius must be smaller than link_length");
    if (!(p.workspace_half_extent >= p.n_links * p.link_length / 4))
        out.emplace_back("workspace_half_extent must be >= n_links * link_length / 4");
    if (!(p.z_max_limit > 2 * p.rope_radius)) out.emplace_back("z_max_limit must exceed 2 * rope_radius");
    return out;
}

inline void validate(const RopeParams& p) {
    auto v = param_violations(p);
    if (!v.empty()) throw InvalidConfig("invalid rope params: " + v.front());
}

/// q = (p, o). Joint positions are canonical; orientations are derived from
/// them (middle-link pose followed by per-link relative pitch/yaw, no roll).
struct RopeConfig {
    RopeParams params;
    std::vector<Vec3> positions;
    std::vector<double> orientations;

    bool operator==(const RopeConfig&) const = default;
};

/// Link `l` (1-based) spans joints l-1 and l. Link 1 is the head.
inline Vec3 link_midpoint(const RopeConfig& q, int link) {
    return 0.5 * (q.positions[link - 1] + q.positions[link]);
}

// Frame whose x-axis is `dir`, built as Rz(yaw) * Ry(pitch).
inline Eigen::Matrix3d yaw_pitch_frame(double yaw, double pitch) {
    return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY())).toRotationMatrix();
}

inline void yaw_pitch_of(const Vec3& dir, double& yaw, double& pitch) {
    yaw = std::atan2(dir.y(), dir.x());
    pitch = std::atan2(-dir.z(), std::hypot(dir.x(), dir.y()));
}

/// Orientation vector layout: (x_mid, y_mid, z_mid, qw, qx, qy, qz,
/// pitch_1, yaw_1, ..., pitch_{N-1}, yaw_{N-1}). Angle pair k gives link k
/// relative to link k-1 (0-based links). Roll is not represented, so the
/// mapping discards torsion.
inline std::vector<double> reconstruct_orientations(std::span<const Vec3> positions) {
    const int n_links = static_cast<int>(positions.size()) - 1;
    if (n_links < 1) throw InvalidConfig("reconstruct_orientations: need at least two joints");

    std::vector<Vec3> dirs(n_links);
    for (int k = 0; k < n_links; ++k) {
        Vec3 d = positions[k + 1] - positions[k];
        double len = d.norm();
        if (!(len > 1e-12)) throw InvalidConfig("reconstruct_orientations: zero-length segment " + std::to_string(k));
        dirs[k] = d / len;
    }

    std::vector<double> o(2 * (n_links - 1) + 7, 0.0);
    double yaw0 = 0, pitch0 = 0;
    yaw_pitch_of(dirs[0], yaw0, pitch0);
    Eigen::Matrix3d frame = yaw_pitch_frame(yaw0, pitch0);
    const int mid = n_links / 2;
    Eigen::Matrix3d mid_frame = frame;
    for (int k = 1; k < n_links; ++k) {
        Vec3 local = frame.transpose() * dirs[k];
        double yaw = 0, pitch = 0;
        yaw_pitch_of(local, yaw, pitch);
        o[7 + 2 * (k - 1)] = pitch;
        o[7 + 2 * (k - 1) + 1] = yaw;
        frame = frame * yaw_pitch_frame(yaw, pitch);
        if (k == mid) mid_frame = frame;
    }

    Vec3 mid_pos = 0.5 * (positions[mid] + positions[mid + 1]);
    Eigen::Quaterniond quat(mid_frame);
    quat.normalize();
    if (quat.w() < 0) quat.coeffs() *= -1.0;
    o[0] = mid_pos.x();
    o[1] = mid_pos.y();
    o[2] = mid_pos.z();
    o[3] = quat.w();
    o[4] = quat.x();
    o[5] = quat.y();
    o[6] = quat.z();
    return o;
}

/// Violations of the RopeConfig invariants; empty when valid.
inline std::vector<std::string> config_violations(const RopeConfig& q) {
    std::vector<std::string> out = param_violations(q.params);
    if (!out.empty()) return out;
    const auto& p = q.params;
    if (static_cast<int>(q.positions.size()) != p.n_joints()) {
        out.emplace_back("positions length must be n_links + 1");
        return out;
    }
    if (static_cast<int>(q.orientations.size()) != p.orientation_size())
        out.emplace_back("orientations length must be 2(N-1)+7");
    for (int k = 0; k < p.n_links; ++k) {
        double d = (q.positions[k + 1] - q.positions[k]).norm();
        if (std::abs(d - p.link_length) > 0.01 * p.link_length) {
            out.emplace_back("link " + std::to_string(k + 1) + " length deviates more than 1%");
            break;
        }
    }
    if (static_cast<int>(q.orientations.size()) == p.orientation_size()) {
        double qn = std::sqrt(q.orientations[3] * q.orientations[3] + q.orientations[4] * q.orientations[4] +
                              q.orientations[5] * q.orientations[5] + q.orientations[6] * q.orientations[6]);
        if (std::abs(qn - 1.0) > 1e-6) out.emplace_back("middle-link quaternion is not unit norm");
    }
    for (int k = 0; k < p.n_joints(); ++k) {
        if (q.positions[k].z() < p.rope_radius - 1e-4) {
            out.emplace_back("joint " + std::to_string(k) + " is below the table");
            break;
        }
    }
    for (const auto& x : q.positions) {
        if (!x.allFinite()) {
            out.emplace_back("non-finite joint position");
            break;
        }
    }
    return out;
}

inline void validate(const RopeConfig& q) {
    auto v = config_violations(q);
    if (!v.empty()) throw InvalidConfig("invalid rope config: " + v.front());
}

/// Builds a config from positions, deriving orientations.
inline RopeConfig make_config(const RopeParams& params, std::vector<Vec3> positions) {
    RopeConfig q{params, std::move(positions), {}};
    q.orientations = reconstruct_orientations(q.positions);
    return q;
}

/// Straight unknot along x, centred on the origin, resting on the table.
inline RopeConfig make_straight_rope(const RopeParams& params) {
    validate(params);
    std::vector<Vec3> pos(params.n_joints());
    const double x0 = -0.5 * params.rope_length();
    for (int i = 0; i < params.n_joints(); ++i) pos[i] = Vec3(x0 + i * params.link_length, 0.0, params.rope_radius);
    return make_config(params, std::move(pos));
}

/// η: positions only, flattened in joint order.
inline std::vector<double> project_eta(const RopeConfig& q) {
    std::vector<double> out;
    out.reserve(3 * q.positions.size());
    for (const auto& x : q.positions) {
        out.push_back(x.x());
        out.push_back(x.y());
        out.push_back(x.z());
    }
    return out;
}

struct Curve {
    int link = 1;
    double x = 0;
    double y = 0;
    double z_max = 0;

    bool operator==(const Curve&) const = default;
};

inline std::vector<std::string> curve_violations(const RopeParams& p, const Curve& c) {
    std::vector<std::string> out;
    if (c.link < 1 || c.link > p.n_links) out.emplace_back("link index out of [1, N]");
    if (!(std::abs(c.x) <= p.workspace_half_extent) || !(std::abs(c.y) <= p.workspace_half_extent))
        out.emplace_back("endpoint outside workspace");
    if (!(c.z_max > 2 * p.rope_radius)) out.emplace_back("z_max must exceed 2 * rope_radius");
    if (!(c.z_max <= p.z_max_limit)) out.emplace_back("z_max exceeds z_max_limit");
    return out;
}

inline void validate(const RopeParams& p, const Curve& c) {
    auto v = curve_violations(p, c);
    if (!v.empty()) throw InvalidConfig("invalid curve: " + v.front());
}

inline Curve make_curve(const RopeParams& p, int link, double x, double y, double z_max) {
    Curve c{link, x, y, z_max};
    validate(p, c);
    return c;
}

/// Maps a normalized action in [-1,1]^4 onto a valid curve: nearest link,
/// affine endpoint over the workspace, lift height in (2r, z_max_limit].
inline Curve decode_action(const RopeParams& p, std::span<const double> a) {
    auto clamp1 = [](double v) { return std::clamp(std::isfinite(v) ? v : 0.0, -1.0, 1.0); };
    const double a0 = clamp1(a[0]), a1 = clamp1(a[1]), a2 = clamp1(a[2]), a3 = clamp1(a[3]);
    Curve c;
    c.link = std::clamp(static_cast<int>(std::lround(1.0 + (a0 + 1.0) * 0.5 * (p.n_links - 1))), 1, p.n_links);
    c.x = a1 * p.workspace_half_extent;
    c.y = a2 * p.workspace_half_extent;
    const double z_lo = 2.0 * p.rope_radius + 1e-3;
    c.z_max = std::min(p.z_max_limit, z_lo + (a3 + 1.0) * 0.5 * (p.z_max_limit - z_lo));
    return c;
}

}  // namespace knotforge
