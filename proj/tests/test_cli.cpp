#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "knotforge/cli.hpp"

using namespace knotforge;

// ---- config ----

TEST(AppConfig, DefaultsValidate) {
    const AppConfig c = app_config_from_json(nlohmann::json::object());
    EXPECT_EQ(c.rope.n_links, 30);
    EXPECT_EQ(c.episode.max_steps, 6);
    EXPECT_EQ(c.sac.gamma, c.episode.gamma);
}

TEST(AppConfig, OverridesApply) {
    const auto j = nlohmann::json::parse(R"({"sim": {"effector_speed": 2.0, "solver_iterations": 10},
        "episode": {"gamma": 0.95}, "run": {"time_cap": 60, "epsilon": 0.1}, "sac": {"hidden": [64, 64]}})");
    const AppConfig c = app_config_from_json(j);
    EXPECT_EQ(c.sim.effector_speed, 2.0);
    EXPECT_EQ(c.sim.solver_iterations, 10);
    EXPECT_EQ(c.sac.gamma, 0.95);
    EXPECT_EQ(c.run.time_cap, 60);
    EXPECT_EQ(c.run.epsilon, 0.1);
    EXPECT_EQ(c.sac.hidden, (std::vector<int>{64, 64}));
    const AppConfig back = app_config_from_json(to_json_value(c));
    EXPECT_EQ(to_json_value(back), to_json_value(c));
}

TEST(AppConfig, RejectsUnknownAndInvalid) {
    EXPECT_THROW(app_config_from_json(nlohmann::json::parse(R"({"physics": {}})")), SchemaError);
    EXPECT_THROW(app_config_from_json(nlohmann::json::parse(R"({"sim": {"speed": 1}})")), SchemaError);
    EXPECT_THROW(app_config_from_json(nlohmann::json::parse(R"({"sim": {"effector_speed": "fast"}})")), SchemaError);
    EXPECT_THROW(app_config_from_json(nlohmann::json::parse(R"({"episode": {"max_steps": 0}})")), InvalidConfig);
    EXPECT_THROW(app_config_from_json(nlohmann::json::parse("[1]")), SchemaError);
}

TEST(AppConfig, ShippedProfilesLoad) {
    const auto dir = std::filesystem::path(KNOTFORGE_SOURCE_DIR) / "configs";
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".json") EXPECT_NO_THROW(load_app_config(e.path().string())) << e.path();
}

// ---- small parsers ----

TEST(Cli, KindSetParsing) {
    const KindSet ks = parse_kind_set("R1,Cross");
    EXPECT_TRUE(ks.contains(MoveKind::R1));
    EXPECT_FALSE(ks.contains(MoveKind::R2));
    EXPECT_TRUE(ks.contains(MoveKind::Cross));
    EXPECT_THROW(parse_kind_set(""), ParseError);
    EXPECT_THROW(parse_kind_set("R3"), ParseError);
}

TEST(Cli, ScheduleParsing) {
    const auto s = parse_schedule("# warm-up\nC/0 2000\n\nC/1 500  # next layer\n");
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].first.name(), "C/0");
    EXPECT_EQ(s[0].second, 2000);
    EXPECT_EQ(s[1].first.name(), "C/1");
    EXPECT_THROW(parse_schedule("C/0"), ParseError);
    EXPECT_THROW(parse_schedule("C/0 -5"), ParseError);
    EXPECT_THROW(parse_schedule("# nothing"), ParseError);
}

TEST(Cli, GoalIds) {
    EXPECT_EQ(goal_id(0), "g000");
    EXPECT_EQ(goal_id(42), "g042");
}

// ---- goal sets ----

TEST(GoalSet, LayerOneHasFourStates) {
    const GoalSet s = make_goalset(1, 100, 0, false);
    EXPECT_EQ(s.goals.size(), 4u);
    for (const auto& g : s.goals) EXPECT_EQ(g.crossings(), 1);
}

TEST(GoalSet, SamplesPerLayerAndSeedDeterminism) {
    const GoalSet a = make_goalset(3, 5, 11, false), b = make_goalset(3, 5, 11, false);
    ASSERT_EQ(a.goals.size(), b.goals.size());
    for (std::size_t i = 0; i < a.goals.size(); ++i) EXPECT_TRUE(states_equal(a.goals[i], b.goals[i]));
    std::map<int, int> per;
    for (const auto& g : a.goals) ++per[g.crossings()];
    EXPECT_EQ(per[1], 4);  // the whole layer
    EXPECT_EQ(per[2], 5);
    EXPECT_EQ(per[3], 5);
    const GoalSet c = make_goalset(3, 5, 12, false);
    bool differs = false;
    for (std::size_t i = 0; i < c.goals.size(); ++i) differs = differs || !states_equal(a.goals[i], c.goals[i]);
    EXPECT_TRUE(differs);
}

TEST(GoalSet, JsonRoundTrip) {
    const GoalSet a = make_goalset(2, 3, 4, false, "small");
    const GoalSet b = goalset_from_json(to_json_value(a));
    EXPECT_EQ(b.name, "small");
    EXPECT_EQ(b.provenance, a.provenance);
    ASSERT_EQ(b.goals.size(), a.goals.size());
    for (std::size_t i = 0; i < a.goals.size(); ++i) EXPECT_TRUE(states_equal(a.goals[i], b.goals[i]));
    EXPECT_THROW(goalset_from_json(nlohmann::json::parse(R"({"goals": []})")), SchemaError);
}

TEST(GoalSet, RejectsBadArguments) {
    EXPECT_THROW(make_goalset(0, 3, 1, false), InvalidConfig);
    EXPECT_THROW(make_goalset(kMaxEnumerationPhi + 1, 3, 1, false), InvalidConfig);
    EXPECT_THROW(make_goalset(2, 0, 1, false), InvalidConfig);
}

// ---- result files ----

TEST(ResultsCsv, RoundTrip) {
    std::vector<EvalRow> rows{{"g000", 1, true, 12.5, 7, 2.333333, 3}, {"g001", 2, false, 1800, 900, 0, 0}};
    const auto back = parse_results_csv(results_csv(rows));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].goal_id, "g000");
    EXPECT_TRUE(back[0].success);
    EXPECT_DOUBLE_EQ(back[0].wall_time_s, 12.5);
    EXPECT_EQ(back[1].curves_total, 900);
    EXPECT_NEAR(back[0].curves_per_transition, 2.333333, 1e-9);
    EXPECT_THROW(parse_results_csv("nope\n"), SchemaError);
    EXPECT_THROW(parse_results_csv(std::string(kResultsHeader) + "\ng000,1,2,0,0,0\n"), SchemaError);
    EXPECT_THROW(parse_results_csv(std::string(kResultsHeader) + "\ng000,1,1,x,0,0\n"), SchemaError);
}

TEST(AnytimeCsv, RoundTripAndSvg) {
    std::vector<AnytimeRow> rows{{0, 0}, {10, 0.25}, {20, 0.5}};
    const auto back = parse_anytime_csv(anytime_csv(rows));
    ASSERT_EQ(back.size(), 3u);
    EXPECT_DOUBLE_EQ(back[2].success_rate, 0.5);
    const std::string svg = anytime_svg(back);
    EXPECT_EQ(svg, anytime_svg(rows));
    EXPECT_NE(svg.find("<polyline"), std::string::npos);
    EXPECT_EQ(svg.rfind("</svg>\n"), svg.size() - 7);
    EXPECT_THROW(parse_anytime_csv("t,s\n"), SchemaError);
}

TEST(EvalOutputs, WritesAllFiles) {
    EvalTable t;
    t.goals = {parse_topo_state("O1+ U1+")};
    RunResult r;
    r.success = true;
    r.wall_time_s = 3;
    r.curves_total = 2;
    r.transitions = 1;
    r.curves_in_transitions = 2;
    t.runs = {r};
    t.rows = {eval_row("g000", r)};
    const auto dir = std::filesystem::temp_directory_path() / "knotforge_eval_out";
    std::filesystem::create_directories(dir);
    write_eval_outputs(t, 10, dir.string());
    for (const char* f : {"results.csv", "per_goal.csv", "anytime.csv", "anytime.svg", "summary.json"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    std::ifstream in(dir / "summary.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j.at("aggregate_success"), 1.0);
    EXPECT_EQ(j.at("mean_curves_per_transition"), 2.0);
    std::ifstream pg(dir / "per_goal.csv");
    std::string header, line;
    std::getline(pg, header);
    std::getline(pg, line);
    EXPECT_EQ(line, "g000,O1+ U1+,1,1,1.000000");
}

// ---- scripted demos ----

TEST(Demo, OverhandReachesTheTrefoil) {
    const DemoLog d = demo_overhand();
    ASSERT_TRUE(d.success) << d.message;
    EXPECT_TRUE(states_equal(d.final_state, parse_topo_state(kTrefoilCode)));
    EXPECT_EQ(d.plan_states.size(), d.curves_per_stage.size() + 1);
    for (std::size_t i = 1; i < d.plan_states.size(); ++i)
        EXPECT_EQ(d.plan_states[i].crossings(), d.plan_states[i - 1].crossings() + 1);
}

TEST(Demo, OverhandIsDeterministic) {
    const DemoLog a = demo_overhand(), b = demo_overhand();
    ASSERT_EQ(a.steps.size(), b.steps.size());
    EXPECT_EQ(a.final_config.positions, b.final_config.positions);
    EXPECT_EQ(to_json_value(a).dump(), to_json_value(b).dump());
}

TEST(Demo, FigureEightHasFourCrossings) {
    const DemoLog d = run_demo(figure8_script());
    ASSERT_TRUE(d.success) << d.message;
    EXPECT_EQ(d.final_state.crossings(), 4);
    EXPECT_EQ(reduce(d.final_state).crossings(), 4);  // not a kinked smaller diagram
    EXPECT_TRUE(states_equal(d.final_state, parse_topo_state(kFigureEightCode)));
    EXPECT_FALSE(states_equal(d.final_state, parse_topo_state(kTrefoilCode)));
}

TEST(Demo, DivergenceIsReported) {
    DemoScript s = overhand_script();
    ASSERT_FALSE(s.stages.empty());
    // Claim a different move for the first stage.
    const TopoState real = apply_move(TopoState{}, s.stages[0].action);
    for (const auto& m : legal_moves(TopoState{}))
        if (!states_equal(apply_move(TopoState{}, m), real)) {
            s.stages[0].action = m;
            break;
        }
    const DemoLog d = run_demo(s);
    EXPECT_FALSE(d.success);
    EXPECT_GE(d.divergence_step, 0);
    EXPECT_FALSE(d.message.empty());
}

TEST(Demo, RunResultMirrorsScript) {
    const DemoLog d = demo_overhand();
    ASSERT_TRUE(d.success);
    const RunResult r = d.as_run_result();
    EXPECT_EQ(r.transitions, static_cast<int>(d.curves_per_stage.size()));
    EXPECT_DOUBLE_EQ(r.curves_per_transition(), double(overhand_script().curves_total()) / r.transitions);
    EXPECT_EQ(eval_row("g000", r).curves_per_transition, r.curves_per_transition());
}

TEST(Demo, GoalSetWithNamedKnots) {
    const GoalSet s = make_goalset(1, 100, 0, true);
    ASSERT_EQ(s.goals.size(), 6u);
    EXPECT_TRUE(states_equal(s.goals[4], parse_topo_state(kTrefoilCode)));
    EXPECT_TRUE(states_equal(s.goals[5], parse_topo_state(kFigureEightCode)));
}
