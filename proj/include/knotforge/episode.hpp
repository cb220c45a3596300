#pragma once

// Goal-conditioned episodes: transition goals, the +1/0/-1 reward, the goal
// encoding rho(g), and the multi-step episode driver.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "knotforge/moves.hpp"
#include "knotforge/physics.hpp"
#include "knotforge/topology.hpp"

namespace knotforge {

/// g = (S, A, S^g) with S^g = apply_move(S, A).
struct TransitionGoal {
    TopoState source;
    HighLevelAction action;
    TopoState target;

    static TransitionGoal make(const TopoState& s, const HighLevelAction& a) { return {s, a, apply_move(s, a)}; }
    static TransitionGoal make(const TopoState& s, const HighLevelAction& a, const TopoState& t) {
        TransitionGoal g = make(s, a);
        if (!states_equal(g.target, t))
            throw InvalidMove("transition target " + to_string(t) + " is not " + describe(a) + " applied to " +
                              to_string(s));
        return g;
    }
};

inline std::string describe(const TransitionGoal& g) {
    return "[" + to_string(g.source) + "] -" + describe(g.action) + "-> [" + to_string(g.target) + "]";
}

inline int reward(const TopoState& prev, const TopoState& next, const TransitionGoal& g) {
    (void)prev;
    if (states_equal(next, g.target)) return +1;
    if (states_equal(next, g.source)) return 0;
    return -1;
}

inline constexpr int kGoalEncodingSize = 8;
using GoalEncoding = std::array<double, kGoalEncodingSize>;

/// [R1, R2, Cross one-hot | end flag (Head 1, Tail -1) | arc / len, arc2 / len
/// | over +-1 | sign (0 for R2)], len = source code length.
inline GoalEncoding encode_goal(const HighLevelAction& a, int source_code_length) {
    GoalEncoding e{};
    e[static_cast<int>(a.kind)] = 1.0;
    if (a.kind == MoveKind::Cross) e[3] = a.end == RopeEnd::Head ? 1.0 : -1.0;
    const double len = source_code_length;
    if (len > 0) {
        e[4] = a.arc / len;
        if (a.kind == MoveKind::R2) e[5] = a.arc2 / len;
    }
    e[6] = a.over ? 1.0 : -1.0;
    e[7] = a.kind == MoveKind::R2 ? 0.0 : static_cast<double>(a.sign);
    return e;
}

inline GoalEncoding encode_goal(const TransitionGoal& g) {
    return encode_goal(g.action, static_cast<int>(g.source.code.size()));
}

struct EpisodeConfig {
    int max_steps = 6;
    double gamma = 0.99;
};

inline void validate(const EpisodeConfig& c) {
    if (c.max_steps < 1) throw InvalidConfig("episode max_steps must be >= 1");
    if (!(c.gamma > 0 && c.gamma < 1)) throw InvalidConfig("episode gamma must be in (0, 1)");
}

inline constexpr int kActionDim = 4;
using Action = std::array<double, kActionDim>;

/// Result of one low-level action in an environment.
template <class Config>
struct EnvStep {
    Config config;
    int substeps = 0;
    bool settled = true;
};

/// The physical environment: curves on the PBD rope, Top on the joints.
struct PhysicsEnv {
    using Config = RopeConfig;
    SimParams sim;
    TopologyOptions topo;

    EnvStep<RopeConfig> step(const RopeConfig& q, const Action& a, std::uint64_t seed) const {
        auto r = step_curve(q, decode_action(q.params, a), sim, seed);
        return {std::move(r.config), r.substeps, r.settled};
    }
    TopoState top(const RopeConfig& q) const { return knotforge::top(q, topo); }
    std::vector<double> observe(const RopeConfig& q) const { return project_eta(q); }
    Curve curve(const RopeConfig& q, const Action& a) const { return decode_action(q.params, a); }
};

enum class Outcome { Success, WrongTransition, Timeout };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Success: return "success";
        case Outcome::WrongTransition: return "wrong_transition";
        case Outcome::Timeout: return "timeout";
    }
    return "?";
}

template <class Config>
struct TraceStep {
    Config before;
    TopoState state;
    Action action{};
    int reward = 0;
    Config after;
    TopoState next;
    bool settled = true;
    bool degenerate = false;  // Top failed twice; `next` is meaningless
};

template <class Config>
struct EpisodeTrace {
    TransitionGoal goal;
    std::vector<TraceStep<Config>> steps;
    Outcome outcome = Outcome::Timeout;
    Config final_config;
    int episode_return() const {
        int r = 0;
        for (const auto& s : steps) r += s.reward;
        return r;
    }
    /// Terminal flag for the bootstrap target of step k.
    bool done(std::size_t k) const { return k + 1 == steps.size() && outcome != Outcome::Timeout; }
};

/// Per-step seeds derived from the episode seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Up to M curves chosen by `policy(observation, rho(g), rng)`; stops at the
/// first change of topology. A degenerate diagram is re-simulated once with
/// a different physics seed before the episode is aborted.
template <class Env, class Policy>
EpisodeTrace<typename Env::Config> run_episode(const Env& env, const typename Env::Config& q0, const TransitionGoal& g,
                                               Policy&& policy, const EpisodeConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    using Config = typename Env::Config;
    if (!states_equal(env.top(q0), g.source))
        throw InvalidMove("run_episode: start configuration is not in the goal's source state");
    std::mt19937_64 rng(mix_seed(seed, 0xe915));
    const GoalEncoding enc = encode_goal(g);
    EpisodeTrace<Config> trace;
    trace.goal = g;
    Config q = q0;
    for (int k = 0; k < cfg.max_steps; ++k) {
        TraceStep<Config> st;
        st.before = q;
        st.state = g.source;
        st.action = policy(env.observe(q), enc, rng);
        const std::uint64_t step_seed = mix_seed(seed, static_cast<std::uint64_t>(k) + 1);
        bool ok = false;
        for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
            const std::uint64_t s = attempt == 0 ? step_seed : mix_seed(step_seed, 0xd1ce);
            auto r = env.step(q, st.action, s);
            try {
                st.next = env.top(r.config);
                st.after = std::move(r.config);
                st.settled = r.settled;
                ok = true;
            } catch (const DegenerateDiagram&) {
                st.after = std::move(r.config);
                st.settled = r.settled;
            }
        }
        if (!ok) {
            st.degenerate = true;
            st.reward = -1;
            trace.final_config = st.after;
            trace.steps.push_back(std::move(st));
            trace.outcome = Outcome::WrongTransition;
            return trace;
        }
        st.reward = reward(st.state, st.next, g);
        q = st.after;
        const bool changed = !states_equal(st.next, g.source);
        const int rew = st.reward;
        trace.steps.push_back(std::move(st));
        if (changed) {
            trace.outcome = rew > 0 ? Outcome::Success : Outcome::WrongTransition;
            trace.final_config = q;
            return trace;
        }
    }
    trace.outcome = Outcome::Timeout;
    trace.final_config = q;
    return trace;
}

/// Uniform actions over [-1, 1]^4.
struct RandomPolicy {
    Action operator()(const std::vector<double>&, const GoalEncoding&, std::mt19937_64& rng) const {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Action a;
        for (auto& x : a) x = u(rng);
        return a;
    }
};

}  // namespace knotforge
