// knotforge command-line front end.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "knotforge/cli.hpp"

namespace fs = std::filesystem;
using namespace knotforge;

namespace {

struct Globals {
    std::string config_path;
    std::uint64_t seed = 0;
    AppConfig cfg;
};

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path);
    f << text;
}

void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::string trim(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

TopoState read_goal(const std::string& path_or_code) {
    if (fs::exists(path_or_code)) return parse_topo_state(trim(read_text_file(path_or_code)));
    return parse_topo_state(trim(path_or_code));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knotforge: symbolic knot planning grounded by goal-conditioned rope skills"};
    app.require_subcommand(1);
    Globals G;
    app.add_option("--config", G.config_path, "JSON file overriding defaults")->check(CLI::ExistingFile);
    app.add_option("--seed", G.seed, "Random seed");

    // enumerate
    auto* en = app.add_subcommand("enumerate", "Enumerate the high-level graph");
    int en_phi = 3;
    std::string en_out;
    std::string en_kinds = "R1,R2,Cross";
    en->add_option("--max-phi", en_phi, "Crossing bound (<= 4)");
    en->add_option("--kinds", en_kinds, "Comma-separated move kinds");
    en->add_option("--out", en_out, "Output JSON (default stdout)");

    // plan
    auto* pl = app.add_subcommand("plan", "Plan from a state to a goal");
    std::string pl_goal, pl_from, pl_out;
    int pl_max = 8;
    pl->add_option("--goal", pl_goal, "Goal P-data file or text")->required();
    pl->add_option("--from", pl_from, "Start P-data file or text (default: unknot)");
    pl->add_option("--max-plans", pl_max, "Number of alternative plans");
    pl->add_option("--out", pl_out, "Output JSON (default stdout)");

    // simulate
    auto* si = app.add_subcommand("simulate", "Execute one curve on a rope state");
    std::string si_state, si_curve, si_out;
    si->add_option("--state", si_state, "Rope state JSON (default: straight rope)");
    si->add_option("--curve", si_curve, "Curve JSON")->required();
    si->add_option("--out", si_out, "Output rope state JSON (default stdout)");

    // top
    auto* tp = app.add_subcommand("top", "Print the P-data of a rope state");
    std::string tp_state;
    tp->add_option("--state", tp_state, "Rope state JSON")->required();

    // train
    auto* tr = app.add_subcommand("train", "Train skill agents");
    std::string tr_variant = "C", tr_kind, tr_out = "agents", tr_pools, tr_schedule;
    int tr_phi = -1;
    long tr_steps = 200000;
    tr->add_option("--variant", tr_variant, "G, A, C or AC");
    tr->add_option("--phi", tr_phi, "Crossing number of the key (C, AC)");
    tr->add_option("--kind", tr_kind, "Move kind of the key (A, AC)");
    tr->add_option("--steps", tr_steps, "Environment steps (curves)");
    tr->add_option("--out", tr_out, "Agent directory");
    tr->add_option("--pools", tr_pools, "Starting pools (CBOR); default <out>/pools.cbor if present");
    tr->add_option("--schedule", tr_schedule, "Schedule file: one '<key> <steps>' per line, trained in order");

    // solve
    auto* so = app.add_subcommand("solve", "Reach a goal state with trained agents");
    std::string so_goal, so_agents = "agents", so_variant = "C", so_out, so_state;
    double so_cap = -1;
    so->add_option("--goal", so_goal, "Goal P-data file or text")->required();
    so->add_option("--agents", so_agents, "Agent directory");
    so->add_option("--variant", so_variant, "G, A, C or AC");
    so->add_option("--time-cap", so_cap, "Seconds");
    so->add_option("--state", so_state, "Start rope state JSON (default: straight rope)");
    so->add_option("--out", so_out, "RunResult JSON (default stdout)");

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate agents on a goal set");
    std::string ev_goals, ev_agents = "agents", ev_variant = "C", ev_out = "eval";
    int ev_seeds = 5;
    double ev_cap = -1;
    bool ev_random = false;
    ev->add_option("--goals", ev_goals, "Goal set JSON")->required();
    ev->add_option("--agents", ev_agents, "Agent directory");
    ev->add_option("--variant", ev_variant, "G, A, C or AC");
    ev->add_option("--seeds", ev_seeds, "Seeds per goal (seed, seed+1, ...)");
    ev->add_option("--time-cap", ev_cap, "Seconds per run");
    ev->add_flag("--random-policy", ev_random, "Use uniform-random curves for every agent key");
    ev->add_option("--out", ev_out, "Output directory");

    // demo
    auto* de = app.add_subcommand("demo", "Scripted knot on the straight rope");
    std::string de_out, de_knot = "overhand";
    de->add_option("--knot", de_knot, "overhand or figure8")->check(CLI::IsMember({"overhand", "figure8"}));
    de->add_option("--out", de_out, "Replay log JSON (default stdout)");

    // goalset
    auto* gs = app.add_subcommand("goalset", "Sample a goal set from the enumeration");
    int gs_phi = 3, gs_k = 10;
    bool gs_named = false;
    std::string gs_out, gs_name;
    gs->add_option("--max-phi", gs_phi, "Crossing bound (<= 4)");
    gs->add_option("--per-layer", gs_k, "States per crossing layer");
    gs->add_flag("--named", gs_named, "Append the trefoil and the figure-8 state");
    gs->add_option("--name", gs_name, "Set name");
    gs->add_option("--out", gs_out, "Output JSON (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!G.config_path.empty()) G.cfg = load_app_config(G.config_path);
        const AppConfig& C = G.cfg;
        const PhysicsEnv env = make_env(C);

        if (*en) {
            write_json(en_out, graph_to_json(enumerate_graph(en_phi, parse_kind_set(en_kinds))));
        } else if (*pl) {
            const TopoState goal = read_goal(pl_goal);
            const TopoState from = pl_from.empty() ? TopoState{} : read_goal(pl_from);
            write_json(pl_out, plans_to_json(plans_from(from, goal, KindSet::all(), pl_max)));
        } else if (*si) {
            RopeConfig q = si_state.empty() ? make_straight_rope(C.rope) : rope_config_from_json(read_json_file(si_state));
            const Curve c = curve_from_json(read_json_file(si_curve));
            validate(q.params, c);
            auto r = step_curve(q, c, C.sim, G.seed);
            nlohmann::json j = to_json_value(r.config);
            if (!r.settled) std::cerr << "warning: physics did not settle within max_substeps\n";
            write_json(si_out, j);
        } else if (*tp) {
            std::cout << to_string(top(rope_config_from_json(read_json_file(tp_state)), C.topology)) << "\n";
        } else if (*tr) {
            fs::create_directories(tr_out);
            std::vector<std::pair<AgentKey, long>> jobs;
            if (!tr_schedule.empty()) {
                jobs = parse_schedule(read_text_file(tr_schedule));
            } else {
                std::string key = tr_variant;
                if (!tr_kind.empty()) key += "/" + tr_kind;
                if (tr_phi >= 0) key += "/" + std::to_string(tr_phi);
                jobs.push_back({parse_agent_key(key), tr_steps});
            }
            const std::string pool_in = !tr_pools.empty() ? tr_pools
                                        : fs::exists(fs::path(tr_out) / "pools.cbor") ? (fs::path(tr_out) / "pools.cbor").string()
                                                                                      : "";
            ConfigPool<RopeConfig> pools = pool_in.empty() ? initial_pools(C) : load_pools(pool_in, mix_seed(G.seed, 0x9001));
            for (const auto& [key, steps] : jobs) {
                std::cerr << "training " << key.name() << " for " << steps << " steps (seed " << G.seed << ")\n";
                const auto graph = enumerate_graph(graph_bound_for(key));
                const std::string stem = (fs::path(tr_out) / key.file_stem()).string();
                std::ofstream hist(stem + ".history.csv");
                hist << kHistoryHeader << "\n";
                auto res = train(env, key, pools, graph, steps, G.seed, C.sac, C.episode, C.train,
                                 ObsNormalizer::for_rope(C.rope), [&](const HistoryRow& r) {
                                     hist << to_csv(r) << "\n" << std::flush;
                                     std::cerr << "  step " << r.step << " eval_success " << r.eval_success << " alpha "
                                               << r.alpha << " cpu " << r.cpu_time_s << "s wall " << r.wall_time_s
                                               << "s\n";
                                 });
                save_policy(res.policy, stem + ".policy");
                save_pools(pools, (fs::path(tr_out) / "pools.cbor").string());
            }
        } else if (*so) {
            RunConfig rc = C.run;
            rc.variant = parse_variant(so_variant);
            rc.seed = G.seed;
            if (so_cap > 0) rc.time_cap = so_cap;
            const RopeConfig q0 =
                so_state.empty() ? make_straight_rope(C.rope) : rope_config_from_json(read_json_file(so_state));
            const auto agents = AgentRegistry::load(so_agents, rc.variant);
            auto r = solve(env, q0, read_goal(so_goal), agents, rc, C.episode);
            write_json(so_out, to_json_value(r));
            std::cerr << (r.success ? "success" : "failure: " + r.failure_reason) << " after " << r.curves_total
                      << " curves, " << r.wall_time_s << " s\n";
        } else if (*ev) {
            RunConfig rc = C.run;
            rc.variant = parse_variant(ev_variant);
            if (ev_cap > 0) rc.time_cap = ev_cap;
            const GoalSet set = goalset_from_json(read_json_file(ev_goals));
            AgentRegistry agents = ev_random ? random_registry(rc.variant) : AgentRegistry::load(ev_agents, rc.variant);
            std::vector<std::uint64_t> seeds;
            for (int i = 0; i < ev_seeds; ++i) seeds.push_back(G.seed + static_cast<std::uint64_t>(i));
            auto table = evaluate_goalset(env, make_straight_rope(C.rope), set, agents, rc, C.episode, seeds);
            fs::create_directories(ev_out);
            write_eval_outputs(table, rc.time_cap, ev_out);
            std::cerr << "aggregate success " << table.aggregate_success() << " over " << table.rows.size()
                      << " runs; curves per transition " << table.mean_curves_per_transition() << "\n";
        } else if (*de) {
            auto log = de_knot == "overhand" ? demo_overhand(C) : run_demo(figure8_script(), C);
            write_json(de_out, to_json_value(log));
            if (!log.success) {
                std::cerr << "demo diverged at step " << log.divergence_step << "\n";
                return 1;
            }
        } else if (*gs) {
            const GoalSet set = make_goalset(gs_phi, gs_k, G.seed, gs_named, gs_name);
            write_json(gs_out, to_json_value(set));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
