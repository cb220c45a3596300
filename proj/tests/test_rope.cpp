#include <gtest/gtest.h>

#include <random>

#include "knotforge/rope_json.hpp"
#include "knotforge/topology.hpp"
#include "oracles.hpp"

using namespace knotforge;

namespace {

// Random self-avoiding-ish chain with exact link lengths, lifted above the table.
std::vector<Vec3> random_chain(const RopeParams& p, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0, 1);
    std::vector<Vec3> pos{Vec3(0, 0, 0.2)};
    for (int k = 0; k < p.n_links; ++k) {
        Vec3 d(n(rng), n(rng), 0.3 * n(rng));
        pos.push_back(pos.back() + p.link_length * d.normalized());
    }
    double zmin = 1e9;
    for (auto& x : pos) zmin = std::min(zmin, x.z());
    for (auto& x : pos) x.z() += p.rope_radius - zmin;
    return pos;
}

}  // namespace

TEST(Rope, StraightRopeEndpoints) {
    RopeParams p;
    auto q = make_straight_rope(p);
    ASSERT_EQ(q.positions.size(), 31u);
    EXPECT_NEAR(q.positions.front().x(), -0.75, 1e-12);
    EXPECT_NEAR(q.positions.back().x(), 0.75, 1e-12);
    for (auto& x : q.positions) {
        EXPECT_EQ(x.y(), 0.0);
        EXPECT_EQ(x.z(), p.rope_radius);
    }
    EXPECT_TRUE(top(q).empty());
}

TEST(Rope, StraightRopeSmallChainHasExactLinks) {
    RopeParams p;
    p.n_links = 4;
    p.workspace_half_extent = 1.0;
    auto q = make_straight_rope(p);
    ASSERT_EQ(q.positions.size(), 5u);
    for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ((q.positions[k + 1] - q.positions[k]).norm(), p.link_length);
}

TEST(Rope, StraightRopeOrientationsAreIdentity) {
    auto q = make_straight_rope(RopeParams{});
    ASSERT_EQ(static_cast<int>(q.orientations.size()), q.params.orientation_size());
    EXPECT_NEAR(q.orientations[3], 1.0, 1e-12);
    for (int i = 4; i < 7; ++i) EXPECT_NEAR(q.orientations[i], 0.0, 1e-12);
    for (std::size_t i = 7; i < q.orientations.size(); ++i) EXPECT_NEAR(q.orientations[i], 0.0, 1e-12);
    const Vec3 mid = link_midpoint(q, q.params.middle_link() + 1);
    EXPECT_NEAR(q.orientations[0], mid.x(), 1e-12);
    EXPECT_NEAR(q.orientations[2], q.params.rope_radius, 1e-12);
}

TEST(Rope, ProjectEtaLengthAndOrder) {
    auto q = make_straight_rope(RopeParams{});
    auto eta = project_eta(q);
    ASSERT_EQ(eta.size(), 93u);
    for (std::size_t i = 0; i < q.positions.size(); ++i)
        for (int k = 0; k < 3; ++k) EXPECT_EQ(eta[3 * i + k], q.positions[i][k]);
}

TEST(Rope, ProjectEtaIgnoresOrientations) {
    auto q = make_straight_rope(RopeParams{});
    auto q2 = q;
    for (auto& o : q2.orientations) o += 0.3;
    EXPECT_EQ(project_eta(q), project_eta(q2));
}

TEST(Rope, ElbowGivesQuarterTurnYaw) {
    RopeParams p;
    p.n_links = 4;
    std::vector<Vec3> pos{{0, 0, 0.01}, {0.05, 0, 0.01}, {0.1, 0, 0.01}, {0.1, 0.05, 0.01}, {0.1, 0.1, 0.01}};
    auto o = reconstruct_orientations(pos);
    // pairs (pitch, yaw) for links 1..3 relative to their predecessor
    EXPECT_NEAR(o[7 + 2 * 0 + 1], 0.0, 1e-12);
    EXPECT_NEAR(o[7 + 2 * 1 + 1], 3.14159265358979 / 2, 1e-12);
    EXPECT_NEAR(o[7 + 2 * 2 + 1], 0.0, 1e-12);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(o[7 + 2 * k], 0.0, 1e-12);
}

TEST(Rope, OrientationsRoundTripThroughForwardKinematics) {
    RopeParams p;
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        auto pos = random_chain(p, rng);
        auto o = reconstruct_orientations(pos);
        Eigen::Vector4d quat(o[3], o[4], o[5], o[6]);
        EXPECT_NEAR(quat.norm(), 1.0, 1e-6);
        auto fk = oracle::joints_from_orientations(o, p.n_links, p.link_length);
        for (int i = 0; i < p.n_joints(); ++i) EXPECT_LT((fk[i] - pos[i]).norm(), 1e-9) << "trial " << trial << " joint " << i;
        auto q = make_config(p, pos);
        EXPECT_EQ(q.positions, pos);
    }
}

TEST(Rope, ZeroLengthSegmentRejected) {
    std::vector<Vec3> pos{{0, 0, 0}, {0, 0, 0}, {1, 0, 0}};
    EXPECT_THROW(reconstruct_orientations(pos), InvalidConfig);
}

TEST(Rope, ValidatorRejectsEachViolation) {
    auto good = make_straight_rope(RopeParams{});
    EXPECT_TRUE(config_violations(good).empty());

    auto short_pos = good;
    short_pos.positions.pop_back();
    EXPECT_FALSE(config_violations(short_pos).empty());

    auto short_o = good;
    short_o.orientations.pop_back();
    EXPECT_FALSE(config_violations(short_o).empty());

    auto stretched = good;
    stretched.positions.back().x() += 0.001;  // 2% on the last link
    EXPECT_FALSE(config_violations(stretched).empty());

    auto bad_quat = good;
    bad_quat.orientations[3] = 1.001;
    EXPECT_FALSE(config_violations(bad_quat).empty());

    auto sunk = good;
    for (auto& x : sunk.positions) x.z() = good.params.rope_radius - 2e-4;
    EXPECT_FALSE(config_violations(sunk).empty());

    auto nan = good;
    nan.positions[3].y() = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(config_violations(nan).empty());
}

TEST(Rope, ParamValidatorRejectsEachViolation) {
    EXPECT_TRUE(param_violations(RopeParams{}).empty());
    RopeParams p;
    p.n_links = 3;
    EXPECT_FALSE(param_violations(p).empty());
    p = {};
    p.link_length = 0;
    EXPECT_FALSE(param_violations(p).empty());
    p = {};
    p.rope_radius = 0;
    EXPECT_FALSE(param_violations(p).empty());
    p = {};
    p.rope_radius = 0.06;
    EXPECT_FALSE(param_violations(p).empty());
    p = {};
    p.workspace_half_extent = 0.3;
    EXPECT_FALSE(param_violations(p).empty());
}

TEST(Rope, CurveValidation) {
    RopeParams p;
    EXPECT_NO_THROW(make_curve(p, 5, 0.1, -0.2, 0.15));
    EXPECT_THROW(make_curve(p, 0, 0, 0, 0.1), InvalidConfig);
    EXPECT_THROW(make_curve(p, 31, 0, 0, 0.1), InvalidConfig);
    EXPECT_THROW(make_curve(p, 1, 1.5, 0, 0.1), InvalidConfig);
    EXPECT_THROW(make_curve(p, 1, 0, -1.5, 0.1), InvalidConfig);
    EXPECT_THROW(make_curve(p, 1, 0, 0, 0.02), InvalidConfig);
    EXPECT_THROW(make_curve(p, 1, 0, 0, 0.6), InvalidConfig);
}

TEST(Rope, DecodedActionsAreAlwaysValidCurves) {
    RopeParams p;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 5000; ++i) {
        std::array<double, 4> a{u(rng), u(rng), u(rng), u(rng)};
        EXPECT_TRUE(curve_violations(p, decode_action(p, a)).empty());
    }
    std::array<double, 4> lo{-1, -1, -1, -1}, hi{1, 1, 1, 1};
    EXPECT_EQ(decode_action(p, lo).link, 1);
    EXPECT_EQ(decode_action(p, hi).link, p.n_links);
    EXPECT_DOUBLE_EQ(decode_action(p, hi).z_max, p.z_max_limit);
    EXPECT_GT(decode_action(p, lo).z_max, 2 * p.rope_radius);
}

TEST(RopeJson, StraightRopeRoundTripIsBitwise) {
    auto q = make_straight_rope(RopeParams{});
    auto text = to_json_value(q).dump();
    auto back = rope_config_from_json(json::parse(text));
    EXPECT_EQ(back, q);
}

TEST(RopeJson, RandomRopeRoundTripIsBitwise) {
    RopeParams p;
    std::mt19937_64 rng(11);
    auto q = make_config(p, random_chain(p, rng));
    auto back = rope_config_from_json(json::parse(to_json_value(q).dump()));
    EXPECT_EQ(back.positions, q.positions);
    EXPECT_EQ(back.orientations, q.orientations);
}

TEST(RopeJson, NullOrientationsAreReconstructed) {
    auto q = make_straight_rope(RopeParams{});
    auto j = to_json_value(q);
    j["orientations"] = nullptr;
    auto back = rope_config_from_json(j);
    EXPECT_EQ(back.orientations, q.orientations);
}

TEST(RopeJson, MissingPositionsIsSchemaError) {
    auto j = to_json_value(make_straight_rope(RopeParams{}));
    j.erase("positions");
    EXPECT_THROW(rope_config_from_json(j), SchemaError);
}

TEST(RopeJson, InvalidStateIsSchemaError) {
    auto j = to_json_value(make_straight_rope(RopeParams{}));
    j["positions"][0] = json::array({5.0, 0.0, 0.01});
    EXPECT_THROW(rope_config_from_json(j), SchemaError);
}

TEST(RopeJson, CurveRoundTrip) {
    Curve c{5, 0.1, -0.2, 0.15};
    EXPECT_EQ(curve_from_json(json::parse(to_json_value(c).dump())), c);
    EXPECT_THROW(curve_from_json(json{{"link", 1}, {"x", 0.0}}), SchemaError);
}
