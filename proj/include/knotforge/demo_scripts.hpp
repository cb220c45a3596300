#pragma once

// Hand-frozen curve scripts that tie knots on the straight rope with the
// default physics, each stage realizing one symbolic move.

#include <string>
#include <vector>

#include "json.hpp"

#include "knotforge/config.hpp"

namespace knotforge {

struct ScriptedCurve {
    Curve curve;
    std::uint64_t seed = 0;
};

struct DemoStage {
    HighLevelAction action;
    std::vector<ScriptedCurve> curves;  // state unchanged until the last one
};

struct DemoScript {
    std::string name;
    std::vector<DemoStage> stages;
    int curves_total() const {
        int n = 0;
        for (const auto& s : stages) n += static_cast<int>(s.curves.size());
        return n;
    }
};

struct DemoStep {
    int stage = 0;
    int curve_index = 0;
    Curve curve;
    std::uint64_t seed = 0;
    TopoState state;
    TopoState expected;
    bool settled = true;
};

struct DemoLog {
    std::string name;
    bool success = false;
    int divergence_step = -1;  // index into steps, -1 when none
    std::string message;
    std::vector<TopoState> plan_states;
    std::vector<std::string> plan_actions;
    std::vector<DemoStep> steps;
    std::vector<int> curves_per_stage;
    TopoState final_state;
    RopeConfig final_config;

    /// Mirrors RunResult: every stage is one successful transition.
    RunResult as_run_result() const {
        RunResult r;
        r.goal = plan_states.empty() ? TopoState{} : plan_states.back();
        r.success = success;
        r.curves_total = static_cast<long>(steps.size());
        if (success) {
            r.transitions = static_cast<int>(curves_per_stage.size());
            for (int c : curves_per_stage) r.curves_in_transitions += c;
        }
        return r;
    }
};

/// Executes the script from the straight rope; every curve is checked
/// against the symbolic plan and the first mismatch stops the run.
inline DemoLog run_demo(const DemoScript& script, const AppConfig& c = {}) {
    DemoLog log;
    log.name = script.name;
    log.plan_states.push_back(TopoState{});
    for (const auto& st : script.stages) {
        log.plan_actions.push_back(describe(st.action));
        log.plan_states.push_back(apply_move(log.plan_states.back(), st.action));
        log.curves_per_stage.push_back(static_cast<int>(st.curves.size()));
    }
    RopeConfig q = make_straight_rope(c.rope);
    TopoState cur{};
    for (std::size_t i = 0; i < script.stages.size(); ++i) {
        const auto& stage = script.stages[i];
        for (std::size_t j = 0; j < stage.curves.size(); ++j) {
            const auto& sc = stage.curves[j];
            DemoStep step;
            step.stage = static_cast<int>(i);
            step.curve_index = static_cast<int>(j);
            step.curve = sc.curve;
            step.seed = sc.seed;
            step.expected = j + 1 == stage.curves.size() ? log.plan_states[i + 1] : log.plan_states[i];
            auto r = step_curve(q, sc.curve, c.sim, sc.seed);
            q = std::move(r.config);
            step.settled = r.settled;
            bool ok = true;
            try {
                step.state = top(q, c.topology);
            } catch (const DegenerateDiagram& e) {
                ok = false;
                log.message = std::string("degenerate diagram: ") + e.what();
            }
            const bool match = ok && states_equal(step.state, step.expected);
            log.steps.push_back(step);
            if (!match) {
                log.divergence_step = static_cast<int>(log.steps.size()) - 1;
                if (log.message.empty())
                    log.message = "expected " + to_string(step.expected) + ", observed " + to_string(step.state);
                log.final_state = step.state;
                log.final_config = q;
                return log;
            }
            cur = step.state;
        }
    }
    log.success = true;
    log.final_state = cur;
    log.final_config = q;
    return log;
}

inline nlohmann::json to_json_value(const DemoLog& d) {
    nlohmann::json steps = nlohmann::json::array(), plan = nlohmann::json::array();
    for (std::size_t i = 0; i < d.plan_states.size(); ++i) {
        nlohmann::json e{{"state", to_string(d.plan_states[i])}, {"crossings", d.plan_states[i].crossings()}};
        if (i > 0) e["action"] = d.plan_actions[i - 1];
        plan.push_back(e);
    }
    for (const auto& s : d.steps)
        steps.push_back({{"stage", s.stage},
                         {"curve_index", s.curve_index},
                         {"curve", to_json_value(s.curve)},
                         {"seed", s.seed},
                         {"state", to_string(s.state)},
                         {"expected", to_string(s.expected)},
                         {"settled", s.settled}});
    return {{"name", d.name},
            {"success", d.success},
            {"divergence_step", d.divergence_step},
            {"message", d.message},
            {"final_state", to_string(d.final_state)},
            {"plan", plan},
            {"curves_per_stage", d.curves_per_stage},
            {"steps", steps},
            {"final_config", to_json_value(d.final_config)}};
}

// Found offline by sampling curves from the straight rope and keeping, stage
// by stage, one whose diagram followed a plan to the target; then rounded and
// re-checked.

inline DemoScript overhand_script() {
    DemoScript s;
    s.name = "overhand";
    s.stages.push_back({parse_action("R1(0,U,+)"), {{{2, 0.262, 0.066, 0.072}, 0}, {{30, -0.178, 0.393, 0.111}, 0}}});  // U1+ O1+
    s.stages.push_back({parse_action("Cross(H,1,O,+)"), {{{28, -0.168, 0.017, 0.167}, 0}, {{1, -0.074, 0.017, 0.109}, 0}}});  // O1+ U2+ U1+ O2+
    s.stages.push_back({parse_action("Cross(T,2,U,+)"), {{{28, 0.219, 0.322, 0.182}, 0}, {{30, 0.540, 0.349, 0.197}, 0}, {{10, 0.682, -0.132, 0.060}, 0}}});  // O1+ U2+ O3+ U1+ O2+ U3+
    return s;
}

inline DemoScript figure8_script() {
    DemoScript s;
    s.name = "figure-8";
    // shares its first two stages with the overhand
    s.stages.push_back({parse_action("R1(0,U,+)"), {{{2, 0.262, 0.066, 0.072}, 0}, {{30, -0.178, 0.393, 0.111}, 0}}});  // U1+ O1+
    s.stages.push_back({parse_action("Cross(H,1,O,+)"), {{{28, -0.168, 0.017, 0.167}, 0}, {{1, -0.074, 0.017, 0.109}, 0}}});  // O1+ U2+ U1+ O2+
    s.stages.push_back({parse_action("Cross(H,2,U,+)"), {{{30, -0.160, 0.025, 0.236}, 0}, {{30, -0.144, -0.039, 0.080}, 0}, {{11, 0.073, 0.119, 0.049}, 0}}});  // U1+ O2+ U3+ O1+ U2+ O3+
    s.stages.push_back({parse_action("Cross(H,4,O,+)"), {{{28, -0.079, 0.068, 0.057}, 0}, {{12, -0.093, -0.079, 0.100}, 0}, {{1, -0.030, -0.066, 0.106}, 0}}});  // O1+ U2+ O3+ U4+ O2+ U1+ U3+ O4+
    return s;
}

}  // namespace knotforge
