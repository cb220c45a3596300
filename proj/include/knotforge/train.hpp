#pragma once

// Training loop for one agent key: rollouts, harvesting, SAC updates,
// periodic evaluation; plus pool persistence (CBOR).

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "knotforge/agents.hpp"
#include "knotforge/rope_json.hpp"
#include "knotforge/sac.hpp"

namespace knotforge {

struct TrainConfig {
    long bootstrap_steps = 2000;
    long eval_every = 5000;
    int eval_episodes = 100;
    int updates_per_step = 1;
    std::size_t pool_capacity = 512;
    double spot_check_rate = 0.05;
};

inline void validate(const TrainConfig& c) {
    if (c.bootstrap_steps < 0) throw InvalidConfig("train.bootstrap_steps must be >= 0");
    if (c.eval_every < 1) throw InvalidConfig("train.eval_every must be >= 1");
    if (c.eval_episodes < 1) throw InvalidConfig("train.eval_episodes must be >= 1");
    if (c.updates_per_step < 0) throw InvalidConfig("train.updates_per_step must be >= 0");
    if (c.pool_capacity < 1) throw InvalidConfig("train.pool_capacity must be >= 1");
    if (!(c.spot_check_rate >= 0 && c.spot_check_rate <= 1)) throw InvalidConfig("train.spot_check_rate must be in [0, 1]");
}

struct HistoryRow {
    long step = 0;
    long episodes = 0;
    double eval_success = 0;
    double critic_loss = 0;
    double actor_loss = 0;
    double alpha_loss = 0;
    double alpha = 0;
    double entropy = 0;
    double cpu_time_s = 0;
    double wall_time_s = 0;
};

inline const char* kHistoryHeader =
    "step,episodes,eval_success,critic_loss,actor_loss,alpha_loss,alpha,entropy,cpu_time_s,wall_time_s";

inline std::string to_csv(const HistoryRow& r) {
    char buf[320];
    std::snprintf(buf, sizeof buf, "%ld,%ld,%.6f,%.8g,%.8g,%.8g,%.8g,%.8g,%.3f,%.3f", r.step, r.episodes, r.eval_success,
                  r.critic_loss, r.actor_loss, r.alpha_loss, r.alpha, r.entropy, r.cpu_time_s, r.wall_time_s);
    return buf;
}

inline double process_cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

/// Highest drawn crossing count a key's transitions can reach.
inline int graph_bound_for(const AgentKey& key) {
    if (key.phi) return std::min(kMaxEnumerationPhi, *key.phi + 2);
    return kMaxEnumerationPhi;
}

/// A fixed list of (goal, start) pairs drawn from the pools.
template <class Config>
std::vector<std::pair<TransitionGoal, Config>> draw_eval_set(const ConfigPool<Config>& pools, const AgentKey& key,
                                                             const HighLevelGraph& graph, int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<TransitionGoal, Config>> out;
    for (int i = 0; i < n; ++i) out.push_back(select_goal_and_start(pools, key, graph, rng));
    return out;
}

/// Success fraction of `policy` over the given (goal, start) pairs.
template <class Env, class Policy>
double evaluate(const Env& env, const std::vector<std::pair<TransitionGoal, typename Env::Config>>& set, Policy&& policy,
                const EpisodeConfig& ecfg, std::uint64_t seed) {
    if (set.empty()) return 0.0;
    int wins = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        auto tr = run_episode(env, set[i].second, set[i].first, policy, ecfg, mix_seed(seed, 0xe7a1 + i));
        wins += tr.outcome == Outcome::Success;
    }
    return static_cast<double>(wins) / static_cast<double>(set.size());
}

template <class Config>
struct TrainResult {
    SacPolicy policy;
    std::vector<HistoryRow> history;
    long env_steps = 0;
    long episodes = 0;
};

/// Trains the agent for `key` for `budget_steps` curves. `pools` must already
/// hold a start for at least one of the key's transitions; it is updated in
/// place by harvesting. `on_row` is called after each evaluation.
template <class Env>
TrainResult<typename Env::Config> train(const Env& env, const AgentKey& key, ConfigPool<typename Env::Config>& pools,
                                        const HighLevelGraph& graph, long budget_steps, std::uint64_t seed,
                                        const SacConfig& scfg, const EpisodeConfig& ecfg, const TrainConfig& tcfg,
                                        const ObsNormalizer& norm,
                                        const std::function<void(const HistoryRow&)>& on_row = {}) {
    validate(tcfg);
    validate(ecfg);
    if (budget_steps < tcfg.bootstrap_steps)
        throw InvalidConfig("training budget (" + std::to_string(budget_steps) + ") is below the bootstrap steps (" +
                            std::to_string(tcfg.bootstrap_steps) + ")");
    SacConfig sc = scfg;
    sc.gamma = ecfg.gamma;
    SacLearner learner(sc, norm, mix_seed(seed, 0x5ac));
    std::mt19937_64 sel(mix_seed(seed, 0x5e1));
    const auto cpu0 = process_cpu_seconds();
    const auto wall0 = std::chrono::steady_clock::now();

    TrainResult<typename Env::Config> res;
    SacMetrics last;
    long next_eval = tcfg.eval_every;
    auto observe = [&](const auto& q) { return env.observe(q); };

    auto eval_row = [&]() {
        HistoryRow r;
        r.step = res.env_steps;
        r.episodes = res.episodes;
        auto set = draw_eval_set(pools, key, graph, tcfg.eval_episodes, mix_seed(seed, 0xe7a1));
        r.eval_success = evaluate(env, set, learner.snapshot(key.name(), true), ecfg, mix_seed(seed, 0xe7a2));
        r.critic_loss = last.critic_loss;
        r.actor_loss = last.actor_loss;
        r.alpha_loss = last.alpha_loss;
        r.alpha = learner.alpha();
        r.entropy = last.entropy;
        r.cpu_time_s = process_cpu_seconds() - cpu0;
        r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
        res.history.push_back(r);
        if (on_row) on_row(r);
    };

    while (res.env_steps < budget_steps) {
        auto [goal, q0] = select_goal_and_start(pools, key, graph, sel);
        const std::uint64_t ep_seed = mix_seed(seed, 0x100000 + static_cast<std::uint64_t>(res.episodes));
        EpisodeTrace<typename Env::Config> trace;
        if (res.env_steps < tcfg.bootstrap_steps)
            trace = run_episode(env, q0, goal, RandomPolicy{}, ecfg, ep_seed);
        else
            trace = run_episode(env, q0, goal, learner.snapshot(key.name()), ecfg, ep_seed);
        ++res.episodes;
        const long n = static_cast<long>(trace.steps.size());
        res.env_steps += n;
        harvest(env, trace, pools, tcfg.spot_check_rate);
        learner.add_trace(trace, observe);
        if (res.env_steps >= tcfg.bootstrap_steps && learner.replay().size() >= static_cast<std::size_t>(sc.batch_size))
            for (long k = 0; k < n * tcfg.updates_per_step; ++k) last = learner.update();
        if (res.env_steps >= next_eval) {
            eval_row();
            while (next_eval <= res.env_steps) next_eval += tcfg.eval_every;
        }
    }
    if (res.history.empty() || res.history.back().step != res.env_steps) eval_row();
    res.policy = learner.snapshot(key.name(), true);
    return res;
}

// Pool persistence.

inline nlohmann::json pools_to_json(const ConfigPool<RopeConfig>& pools) {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& s : pools.nonempty_states()) {
        const auto& items = *pools.find(s);
        nlohmann::json configs = nlohmann::json::array();
        for (const auto& q : items) {
            std::vector<double> flat;
            for (const auto& x : q.positions) flat.insert(flat.end(), {x.x(), x.y(), x.z()});
            configs.push_back(flat);
        }
        states.push_back({{"state", to_string(s)}, {"seen", pools.seen(s)}, {"positions", configs}});
    }
    RopeParams p;
    for (const auto& [s, r] : pools.states())
        if (!r.items.empty()) p = r.items.front().params;
    nlohmann::json params = to_json_value(p);
    return {{"format", "knotforge-pools"}, {"version", 1}, {"capacity", pools.capacity()}, {"params", params},
            {"states", states}};
}

inline ConfigPool<RopeConfig> pools_from_json(const nlohmann::json& j, std::uint64_t seed = 0) {
    try {
        ConfigPool<RopeConfig> pools(j.at("capacity").get<std::size_t>(), seed);
        const RopeParams p = rope_params_from_json(j.at("params"));
        for (const auto& e : j.at("states")) {
            const TopoState s = parse_topo_state(e.at("state").get<std::string>());
            std::vector<RopeConfig> items;
            for (const auto& flat : e.at("positions")) {
                auto v = flat.get<std::vector<double>>();
                if (static_cast<int>(v.size()) != 3 * p.n_joints()) throw SchemaError("pool config has wrong length");
                std::vector<Vec3> pos;
                for (std::size_t i = 0; i < v.size(); i += 3) pos.emplace_back(v[i], v[i + 1], v[i + 2]);
                items.push_back(make_config(p, std::move(pos)));
            }
            pools.restore(s, std::move(items), e.at("seen").get<std::uint64_t>());
        }
        return pools;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("pool file: ") + e.what());
    }
}

inline void save_pools(const ConfigPool<RopeConfig>& pools, const std::string& path) {
    const auto bytes = nlohmann::json::to_cbor(pools_to_json(pools));
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write pools " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline ConfigPool<RopeConfig> load_pools(const std::string& path, std::uint64_t seed = 0) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open pools " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    nlohmann::json j;
    try {
        j = nlohmann::json::from_cbor(bytes);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return pools_from_json(j, seed);
}

}  // namespace knotforge
