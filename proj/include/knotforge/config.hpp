#pragma once

// Global JSON configuration. Every section and field is optional; present
// fields override the built-in defaults, unknown ones are rejected.

#include <set>
#include <string>

#include "json.hpp"

#include "knotforge/orchestrator.hpp"
#include "knotforge/rope_json.hpp"
#include "knotforge/train.hpp"

namespace knotforge {

struct AppConfig {
    RopeParams rope;
    SimParams sim;
    TopologyOptions topology;
    SacConfig sac;
    EpisodeConfig episode;
    TrainConfig train;
    RunConfig run;
};

namespace detail {

class Section {
public:
    Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw SchemaError("config: \"" + name_ + "\" must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const auto& v = j_.at(key);
        bool ok;
        if constexpr (std::is_same_v<T, bool>)
            ok = v.is_boolean();
        else if constexpr (std::is_integral_v<T>)
            ok = v.is_number_integer() && (!std::is_unsigned_v<T> || v.get<long long>() >= 0);
        else if constexpr (std::is_floating_point_v<T>)
            ok = v.is_number();
        else if constexpr (std::is_same_v<T, std::string>)
            ok = v.is_string();
        else
            ok = v.is_array();
        if (!ok) throw SchemaError("config: " + name_ + "." + key + " has the wrong type");
        try {
            out = v.get<T>();
        } catch (const nlohmann::json::exception&) {
            throw SchemaError("config: " + name_ + "." + key + " has the wrong type");
        }
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw SchemaError("config: unknown field " + name_ + "." + k);
    }

private:
    const nlohmann::json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

}  // namespace detail

inline AppConfig app_config_from_json(const nlohmann::json& j, AppConfig c = {}) {
    if (!j.is_object()) throw SchemaError("config: top level must be an object");
    static const std::set<std::string> sections{"rope", "sim", "topology", "sac", "episode", "train", "run"};
    for (const auto& [k, v] : j.items())
        if (!sections.count(k)) throw SchemaError("config: unknown section \"" + k + "\"");

    if (j.contains("rope")) {
        detail::Section s(j.at("rope"), "rope");
        s.get("n_links", c.rope.n_links);
        s.get("link_length", c.rope.link_length);
        s.get("rope_radius", c.rope.rope_radius);
        s.get("workspace_half_extent", c.rope.workspace_half_extent);
        s.get("z_max_limit", c.rope.z_max_limit);
        s.finish();
    }
    if (j.contains("sim")) {
        detail::Section s(j.at("sim"), "sim");
        s.get("substep_dt", c.sim.substep_dt);
        s.get("gravity", c.sim.gravity);
        s.get("solver_iterations", c.sim.solver_iterations);
        s.get("friction_coeff", c.sim.friction_coeff);
        s.get("damping", c.sim.damping);
        s.get("effector_speed", c.sim.effector_speed);
        s.get("settle_speed_eps", c.sim.settle_speed_eps);
        s.get("settle_window", c.sim.settle_window);
        s.get("max_substeps", c.sim.max_substeps);
        s.get("jitter_scale", c.sim.jitter_scale);
        s.finish();
    }
    if (j.contains("topology")) {
        detail::Section s(j.at("topology"), "topology");
        s.get("endpoint_tolerance", c.topology.endpoint_tolerance);
        s.get("min_crossing_angle_deg", c.topology.min_crossing_angle_deg);
        s.get("jitter_scale", c.topology.jitter_scale);
        s.finish();
    }
    if (j.contains("sac")) {
        detail::Section s(j.at("sac"), "sac");
        s.get("hidden", c.sac.hidden);
        s.get("lr", c.sac.lr);
        s.get("batch_size", c.sac.batch_size);
        s.get("replay_capacity", c.sac.replay_capacity);
        s.get("tau", c.sac.tau);
        s.get("init_alpha", c.sac.init_alpha);
        s.get("target_entropy", c.sac.target_entropy);
        s.finish();
    }
    if (j.contains("episode")) {
        detail::Section s(j.at("episode"), "episode");
        s.get("max_steps", c.episode.max_steps);
        s.get("gamma", c.episode.gamma);
        s.finish();
    }
    if (j.contains("train")) {
        detail::Section s(j.at("train"), "train");
        s.get("bootstrap_steps", c.train.bootstrap_steps);
        s.get("eval_every", c.train.eval_every);
        s.get("eval_episodes", c.train.eval_episodes);
        s.get("updates_per_step", c.train.updates_per_step);
        s.get("pool_capacity", c.train.pool_capacity);
        s.get("spot_check_rate", c.train.spot_check_rate);
        s.finish();
    }
    if (j.contains("run")) {
        detail::Section s(j.at("run"), "run");
        s.get("time_cap", c.run.time_cap);
        s.get("epsilon", c.run.epsilon);
        s.get("max_plans", c.run.max_plans);
        s.get("max_episodes", c.run.max_episodes);
        s.finish();
    }
    c.sac.gamma = c.episode.gamma;
    validate(c.rope);
    validate(c.sim);
    validate(c.sac);
    validate(c.episode);
    validate(c.train);
    validate(c.run);
    return c;
}

inline AppConfig load_app_config(const std::string& path) { return app_config_from_json(read_json_file(path)); }

inline nlohmann::json to_json_value(const AppConfig& c) {
    return {
        {"rope", to_json_value(c.rope)},
        {"sim",
         {{"substep_dt", c.sim.substep_dt},
          {"gravity", c.sim.gravity},
          {"solver_iterations", c.sim.solver_iterations},
          {"friction_coeff", c.sim.friction_coeff},
          {"damping", c.sim.damping},
          {"effector_speed", c.sim.effector_speed},
          {"settle_speed_eps", c.sim.settle_speed_eps},
          {"settle_window", c.sim.settle_window},
          {"max_substeps", c.sim.max_substeps},
          {"jitter_scale", c.sim.jitter_scale}}},
        {"topology",
         {{"endpoint_tolerance", c.topology.endpoint_tolerance},
          {"min_crossing_angle_deg", c.topology.min_crossing_angle_deg},
          {"jitter_scale", c.topology.jitter_scale}}},
        {"sac",
         {{"hidden", c.sac.hidden},
          {"lr", c.sac.lr},
          {"batch_size", c.sac.batch_size},
          {"replay_capacity", c.sac.replay_capacity},
          {"tau", c.sac.tau},
          {"init_alpha", c.sac.init_alpha},
          {"target_entropy", c.sac.target_entropy}}},
        {"episode", {{"max_steps", c.episode.max_steps}, {"gamma", c.episode.gamma}}},
        {"train",
         {{"bootstrap_steps", c.train.bootstrap_steps},
          {"eval_every", c.train.eval_every},
          {"eval_episodes", c.train.eval_episodes},
          {"updates_per_step", c.train.updates_per_step},
          {"pool_capacity", c.train.pool_capacity},
          {"spot_check_rate", c.train.spot_check_rate}}},
        {"run",
         {{"time_cap", c.run.time_cap},
          {"epsilon", c.run.epsilon},
          {"max_plans", c.run.max_plans},
          {"max_episodes", c.run.max_episodes}}},
    };
}

inline PhysicsEnv make_env(const AppConfig& c) { return PhysicsEnv{c.sim, c.topology}; }

}  // namespace knotforge
