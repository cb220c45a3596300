#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "knotforge/train.hpp"
#include "stub_world.hpp"

using namespace knotforge;

namespace {

TopoState S(const char* text) { return parse_topo_state(text); }

stub::Config at(const TopoState& s) { return stub::Config{s}; }

}  // namespace

// ---- reward ----

TEST(Reward, TargetSourceOther) {
    const auto g = TransitionGoal::make(TopoState{}, make_r1(0, true, +1));
    EXPECT_EQ(reward(g.source, g.target, g), 1);
    EXPECT_EQ(reward(g.source, g.source, g), 0);
    EXPECT_EQ(reward(g.source, S("U1+ O1+"), g), -1);
    EXPECT_EQ(reward(g.source, S("O1+ U2+ U1+ O2+"), g), -1);
}

TEST(Reward, ExhaustiveOverSmallGraph) {
    const auto graph = enumerate_graph(2);
    for (const auto& e : graph.edges) {
        const auto g = TransitionGoal::make(graph.nodes[e.source], e.action, graph.nodes[e.target]);
        for (const auto& next : graph.nodes) {
            const int want = states_equal(next, g.target) ? 1 : states_equal(next, g.source) ? 0 : -1;
            ASSERT_EQ(reward(g.source, next, g), want);
        }
    }
}

TEST(TransitionGoal, InconsistentTargetThrows) {
    EXPECT_THROW(TransitionGoal::make(TopoState{}, make_r1(0, true, +1), S("U1+ O1+")), InvalidMove);
    EXPECT_NO_THROW(TransitionGoal::make(TopoState{}, make_r1(0, true, +1), S("O1+ U1+")));
}

// ---- goal encoding ----

TEST(GoalEncoding, R1LayoutReadOff) {
    const auto e = encode_goal(TransitionGoal::make(TopoState{}, make_r1(0, true, +1)));
    const GoalEncoding want{1, 0, 0, 0, 0, 0, 1, 1};
    EXPECT_EQ(e, want);
}

TEST(GoalEncoding, SourceIndependent) {
    const TopoState tre = S("O1+ U2+ O3+ U1+ O2+ U3+");
    const auto a = make_r1(0, true, +1);
    EXPECT_EQ(encode_goal(TransitionGoal::make(tre, a)), encode_goal(TransitionGoal::make(TopoState{}, a)));
}

TEST(GoalEncoding, CrossHeadArcTwoOfSix) {
    const TopoState tre = S("O1+ U2+ O3+ U1+ O2+ U3+");
    const auto e = encode_goal(TransitionGoal::make(tre, make_cross(RopeEnd::Head, 2, true, -1)));
    EXPECT_DOUBLE_EQ(e[4], 2.0 / 6.0);
    EXPECT_EQ(e[3], 1.0);
    EXPECT_EQ(e[7], -1.0);
    EXPECT_EQ(e[2], 1.0);
    EXPECT_EQ(e[6], 1.0);
}

TEST(GoalEncoding, InjectiveAndBoundedOnParameterGrid) {
    for (const char* text : {"", "O1+ U1+", "O1+ U2+ U1+ O2+", "O1+ U2+ O3+ U1+ O2+ U3+"}) {
        const TopoState s = S(text);
        std::map<GoalEncoding, std::string> seen;
        for (const auto& a : legal_moves(s)) {
            const auto e = encode_goal(a, static_cast<int>(s.code.size()));
            static_assert(std::tuple_size_v<GoalEncoding> == 8);
            for (double v : e) {
                EXPECT_GE(v, -1.0);
                EXPECT_LE(v, 1.0);
            }
            auto [it, fresh] = seen.emplace(e, describe(a));
            EXPECT_TRUE(fresh) << describe(a) << " collides with " << it->second << " on '" << text << "'";
        }
    }
}

// ---- episodes (symbolic stub world) ----

TEST(Episode, NeverChangingPolicyTimesOut) {
    stub::World w;
    const auto g = TransitionGoal::make(TopoState{}, make_r1(0, true, +1));
    auto idle = [](const std::vector<double>&, const GoalEncoding&, std::mt19937_64&) { return Action{}; };
    EpisodeConfig cfg;
    auto tr = run_episode(w, at(TopoState{}), g, idle, cfg, 1);
    EXPECT_EQ(tr.outcome, Outcome::Timeout);
    ASSERT_EQ(static_cast<int>(tr.steps.size()), cfg.max_steps);
    for (const auto& s : tr.steps) EXPECT_EQ(s.reward, 0);
    EXPECT_FALSE(tr.done(tr.steps.size() - 1));
}

TEST(Episode, ScriptedSuccessOnStepTwo) {
    stub::World w;
    const auto g = TransitionGoal::make(S("O1+ U1+"), make_cross(RopeEnd::Tail, 1, true, +1));
    auto tr = run_episode(w, at(g.source), g, stub::DelayedPolicy{1}, EpisodeConfig{}, 7);
    EXPECT_EQ(tr.outcome, Outcome::Success);
    ASSERT_EQ(tr.steps.size(), 2u);
    EXPECT_EQ(tr.steps[0].reward, 0);
    EXPECT_EQ(tr.steps[1].reward, 1);
    EXPECT_TRUE(states_equal(tr.final_config.s, g.target));
    EXPECT_FALSE(tr.done(0));
    EXPECT_TRUE(tr.done(1));
}

TEST(Episode, WrongTransitionEndsWithMinusOne) {
    stub::World w;
    const auto g = TransitionGoal::make(TopoState{}, make_r1(0, true, +1));
    auto tr = run_episode(w, at(TopoState{}), g, stub::CoinPolicy{0.0, 1.0}, EpisodeConfig{}, 3);
    EXPECT_EQ(tr.outcome, Outcome::WrongTransition);
    ASSERT_EQ(tr.steps.size(), 1u);
    EXPECT_EQ(tr.steps[0].reward, -1);
}

TEST(Episode, StartMustBeInSourceState) {
    stub::World w;
    const auto g = TransitionGoal::make(TopoState{}, make_r1(0, true, +1));
    EXPECT_THROW(run_episode(w, at(S("O1+ U1+")), g, stub::CoinPolicy{}, EpisodeConfig{}, 1), InvalidMove);
}

TEST(Episode, DegenerateStepRetriedOnce) {
    stub::World w;
    w.degenerate_budget = std::make_shared<int>(1);
    const auto g = TransitionGoal::make(TopoState{}, make_r1(0, true, +1));
    auto tr = run_episode(w, at(TopoState{}), g, stub::CoinPolicy{1.0, 0.0}, EpisodeConfig{}, 1);
    EXPECT_EQ(tr.outcome, Outcome::Success);
    EXPECT_EQ(*w.steps, 2);
}

TEST(Episode, DegenerateTwiceAbortsAsWrongTransition) {
    stub::World w;
    w.degenerate_budget = std::make_shared<int>(2);
    const auto g = TransitionGoal::make(TopoState{}, make_r1(0, true, +1));
    auto tr = run_episode(w, at(TopoState{}), g, stub::CoinPolicy{1.0, 0.0}, EpisodeConfig{}, 1);
    EXPECT_EQ(tr.outcome, Outcome::WrongTransition);
    ASSERT_EQ(tr.steps.size(), 1u);
    EXPECT_TRUE(tr.steps[0].degenerate);
    EXPECT_EQ(tr.steps[0].reward, -1);
}

TEST(Episode, ReturnPropertiesUnderRandomStubPolicies) {
    stub::World w;
    const auto graph = enumerate_graph(2);
    std::mt19937_64 rng(11);
    for (int i = 0; i < 400; ++i) {
        const auto& e = graph.edges[rng() % graph.edges.size()];
        const auto g = TransitionGoal::make(graph.nodes[e.source], e.action);
        std::uniform_real_distribution<double> u(0.0, 0.5);
        stub::CoinPolicy pol{u(rng), u(rng)};
        EpisodeConfig cfg{1 + static_cast<int>(rng() % 8), 0.99};
        auto tr = run_episode(w, at(g.source), g, pol, cfg, rng());
        const int ret = tr.episode_return();
        EXPECT_TRUE(ret == -1 || ret == 0 || ret == 1);
        EXPECT_EQ(ret == 1, tr.outcome == Outcome::Success);
        for (std::size_t k = 0; k + 1 < tr.steps.size(); ++k) EXPECT_EQ(tr.steps[k].reward, 0);
        EXPECT_LE(static_cast<int>(tr.steps.size()), cfg.max_steps);
    }
}

TEST(Episode, ConfigValidation) {
    EXPECT_THROW(validate(EpisodeConfig{0, 0.99}), InvalidConfig);
    EXPECT_THROW(validate(EpisodeConfig{6, 1.0}), InvalidConfig);
    EXPECT_THROW(validate(EpisodeConfig{6, 0.0}), InvalidConfig);
}

// ---- agent registry ----

TEST(Registry, LookupExamples) {
    const auto r2_from_1 = TransitionGoal::make(S("O1+ U1+"), make_r2(0, 1, true));
    const auto cross_from_2 = TransitionGoal::make(S("O1+ U2+ U1+ O2+"), make_cross(RopeEnd::Head, 0, true, +1));
    EXPECT_EQ(registry_lookup(Variant::G, r2_from_1).name(), "G");
    EXPECT_EQ(registry_lookup(Variant::AC, r2_from_1).name(), "AC/R2/1");
    EXPECT_EQ(registry_lookup(Variant::C, cross_from_2).name(), "C/2");
    EXPECT_EQ(registry_lookup(Variant::A, cross_from_2).name(), "A/Cross");
}

TEST(Registry, EveryTransitionHasExactlyOneKey) {
    const auto graph = enumerate_graph(3);
    for (Variant v : {Variant::G, Variant::A, Variant::C, Variant::AC}) {
        std::set<AgentKey> keys;
        for (const auto& e : graph.edges)
            keys.insert(registry_lookup(v, TransitionGoal::make(graph.nodes[e.source], e.action)));
        for (int id = 0; id < static_cast<int>(graph.nodes.size()); id += 7) {
            std::size_t covered = 0;
            for (const auto& k : keys) covered += eligible_transitions(graph, graph.nodes[id], k).size();
            EXPECT_EQ(covered, graph.out_edges[id].size());
        }
    }
}

TEST(Registry, KeyTextRoundTrip) {
    for (const char* k : {"G", "A/R1", "C/0", "AC/Cross/3"}) {
        EXPECT_EQ(parse_agent_key(k).name(), k);
        EXPECT_EQ(parse_agent_key(parse_agent_key(k).file_stem()).name(), k);
    }
    EXPECT_THROW(parse_agent_key("C"), ParseError);
    EXPECT_THROW(parse_agent_key("Q/1"), ParseError);
    EXPECT_THROW(parse_agent_key("AC/R1/x"), ParseError);
}

// ---- goal / start selection ----

TEST(Selection, CrossingZeroOnlyStraightRopePooled) {
    ConfigPool<stub::Config> pools(8, 1);
    pools.insert(TopoState{}, at(TopoState{}));
    const auto graph = enumerate_graph(1);
    std::mt19937_64 rng(5);
    std::map<std::string, int> seen;
    for (int i = 0; i < 2000; ++i) {
        auto [g, q] = select_goal_and_start(pools, parse_agent_key("C/0"), graph, rng);
        EXPECT_TRUE(g.source.empty());
        EXPECT_EQ(g.target.crossings(), 1);
        ++seen[describe(g.action)];
    }
    EXPECT_EQ(seen.size(), graph.out_edges[0].size());
}

TEST(Selection, ChiSquareUniformOverFourTransitions) {
    ConfigPool<stub::Config> pools(8, 1);
    pools.insert(TopoState{}, at(TopoState{}));
    const auto graph = enumerate_graph(1);
    const AgentKey key = parse_agent_key("AC/R1/0");
    ASSERT_EQ(eligible_transitions(graph, TopoState{}, key).size(), 4u);
    std::mt19937_64 rng(2024);
    std::map<std::string, int> count;
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++count[describe(select_goal_and_start(pools, key, graph, rng).first.action)];
    ASSERT_EQ(count.size(), 4u);
    const double p = 0.25, sigma = std::sqrt(p * (1 - p) / n);
    double chi2 = 0;
    for (const auto& [k, c] : count) {
        EXPECT_NEAR(c / double(n), p, 3 * sigma) << k;
        chi2 += (c - n * p) * (c - n * p) / (n * p);
    }
    EXPECT_LT(chi2, 16.27);  // chi-square, 3 dof, p = 0.001
}

TEST(Selection, UniformOverPoolMembers) {
    ConfigPool<stub::Config> pools(8, 1);
    for (long i = 0; i < 4; ++i) pools.insert(TopoState{}, stub::Config{TopoState{}, false, i});
    const auto graph = enumerate_graph(1);
    std::mt19937_64 rng(9);
    std::map<long, int> count;
    for (int i = 0; i < 8000; ++i) ++count[select_goal_and_start(pools, parse_agent_key("C/0"), graph, rng).second.stamp];
    for (const auto& [k, c] : count) EXPECT_NEAR(c / 8000.0, 0.25, 3 * std::sqrt(0.25 * 0.75 / 8000));
}

TEST(Selection, NoEligiblePoolThrows) {
    ConfigPool<stub::Config> pools(8, 1);
    pools.insert(TopoState{}, at(TopoState{}));
    const auto graph = enumerate_graph(3);
    std::mt19937_64 rng(1);
    EXPECT_THROW(select_goal_and_start(pools, parse_agent_key("C/1"), graph, rng), Error);
    ConfigPool<stub::Config> empty(8, 1);
    EXPECT_THROW(select_goal_and_start(empty, parse_agent_key("G"), graph, rng), Error);
}

// ---- pools and harvesting ----

TEST(Harvest, UnintendedTwoCrossingStateIsPooled) {
    stub::World w;
    ConfigPool<stub::Config> pools(8, 1);
    const auto g = TransitionGoal::make(TopoState{}, make_r1(0, true, +1));
    // An R2 poke instead of the kink.
    auto r2 = [](const std::vector<double>& obs, const GoalEncoding&, std::mt19937_64&) {
        const auto moves = legal_moves(stub::state_from_obs(obs));
        for (std::size_t i = 0; i < moves.size(); ++i)
            if (moves[i].kind == MoveKind::R2) return Action{-1.0, 0.0, double(i), 0.0};
        return Action{};
    };
    auto tr = run_episode(w, at(TopoState{}), g, r2, EpisodeConfig{}, 1);
    ASSERT_EQ(tr.outcome, Outcome::WrongTransition);
    harvest(w, tr, pools, 1.0);
    ASSERT_EQ(tr.steps.back().next.crossings(), 2);
    EXPECT_EQ(pools.size(tr.steps.back().next), 1u);
}

TEST(Harvest, TimeoutAddsSameStateConfigsToSourcePool) {
    stub::World w;
    ConfigPool<stub::Config> pools(64, 1);
    const auto g = TransitionGoal::make(TopoState{}, make_r1(0, true, +1));
    auto idle = [](const std::vector<double>&, const GoalEncoding&, std::mt19937_64&) { return Action{}; };
    auto tr = run_episode(w, at(TopoState{}), g, idle, EpisodeConfig{}, 1);
    const auto st = harvest(w, tr, pools, 1.0);
    EXPECT_EQ(st.inserted, 6);
    EXPECT_EQ(pools.size(TopoState{}), 6u);
}

TEST(Harvest, SkipsStatesBeyondBound) {
    stub::World w;
    ConfigPool<stub::Config> pools(8, 1);
    const TopoState big = S("O1+ U2+ O3+ U1+ O2+ U3+");
    const auto g = TransitionGoal::make(big, make_r2(0, 1, true));
    auto tr = run_episode(w, at(big), g, stub::CoinPolicy{1.0, 0.0}, EpisodeConfig{}, 1);
    ASSERT_EQ(tr.outcome, Outcome::Success);
    EXPECT_EQ(harvest(w, tr, pools, 1.0, 4).inserted, 0);
}

TEST(Pool, ReservoirAtCapacityKeepsSizeAndIsUniform) {
    const int cap = 5, n = 50, trials = 4000;
    std::vector<int> hits(n, 0);
    for (int t = 0; t < trials; ++t) {
        ConfigPool<stub::Config> pools(cap, 1000 + t);
        for (long i = 0; i < n; ++i) {
            pools.insert(TopoState{}, stub::Config{TopoState{}, false, i});
            ASSERT_EQ(pools.size(TopoState{}), static_cast<std::size_t>(std::min<long>(i + 1, cap)));
        }
        EXPECT_EQ(pools.seen(TopoState{}), static_cast<std::uint64_t>(n));
        for (const auto& q : *pools.find(TopoState{})) ++hits[q.stamp];
    }
    const double p = double(cap) / n, sigma = std::sqrt(p * (1 - p) / trials);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(hits[i] / double(trials), p, 4 * sigma) << "item " << i;
}

TEST(Pool, SpotCheckDetectsMislabelledConfig) {
    stub::World w;
    ConfigPool<stub::Config> pools(8, 1);
    EpisodeTrace<stub::Config> tr;
    TraceStep<stub::Config> st;
    st.after = at(S("O1+ U1+"));
    st.next = S("U1+ O1+");
    tr.steps.push_back(st);
    EXPECT_THROW(harvest(w, tr, pools, 1.0), Error);
}

TEST(Pool, PhysicsHarvestIsSound) {
    PhysicsEnv env;
    env.sim.effector_speed = 2.0;
    env.sim.solver_iterations = 10;
    ConfigPool<RopeConfig> pools(16, 3);
    const RopeConfig q0 = make_straight_rope(RopeParams{});
    pools.insert(TopoState{}, q0);
    const auto graph = enumerate_graph(2);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 6; ++i) {
        auto [g, q] = select_goal_and_start(pools, parse_agent_key("C/0"), graph, rng);
        auto tr = run_episode(env, q, g, RandomPolicy{}, EpisodeConfig{}, rng());
        harvest(env, tr, pools, 1.0);
    }
    for (const auto& [s, r] : pools.states())
        for (const auto& q : r.items) EXPECT_TRUE(states_equal(env.top(q), s));
}

TEST(Pool, CborRoundTrip) {
    ConfigPool<RopeConfig> pools(4, 1);
    RopeConfig q = make_straight_rope(RopeParams{});
    pools.insert(TopoState{}, q);
    q.positions[3].y() += 0.01;
    pools.insert(TopoState{}, q);
    const auto j = pools_to_json(pools);
    const auto back = pools_from_json(nlohmann::json::from_cbor(nlohmann::json::to_cbor(j)));
    ASSERT_EQ(back.size(TopoState{}), 2u);
    EXPECT_EQ(back.seen(TopoState{}), 2u);
    EXPECT_EQ(back.find(TopoState{})->at(1).positions, q.positions);
    EXPECT_EQ(back.capacity(), 4u);
}
