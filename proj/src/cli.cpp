#include "cfset/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cfset/checker.hpp"
#include "cfset/digest.hpp"
#include "cfset/explorer.hpp"
#include "cfset/linearize.hpp"
#include "cfset/runtime.hpp"
#include "cfset/trace.hpp"

#ifndef CFSET_VERSION
#define CFSET_VERSION "dev"
#endif

namespace cfset::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

void init_logging() {
    auto logger = spdlog::get("cfset");
    if (!logger) {
        logger = spdlog::stderr_color_mt("cfset");
        spdlog::set_default_logger(logger);
    }
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("CFSET_LOG"))
        level = spdlog::level::from_str(env);
    spdlog::set_level(level);
}

namespace {

struct ModelFlags {
    ExploreConfig cfg;
    std::string pt2 = "corrected";
    bool no_lin = false;

    ExploreConfig resolved() const {
        ExploreConfig c = cfg;
        c.pt2 = *parse_pt2_variant(pt2);
        c.check_linearizability = !no_lin;
        return c;
    }
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
    f.cfg.num_workers = 2;
    f.cfg.keys = {1, 2, 3};
    f.cfg.ops_per_worker = 2;
    f.cfg.sys_budget = 2;
    f.cfg.depth_limit = 12;
    cmd->add_option("--workers", f.cfg.num_workers, "working processes")->check(CLI::Range(1, 8));
    cmd->add_option("--keys", f.cfg.keys, "key universe, comma separated")->delimiter(',');
    cmd->add_option("--ops", f.cfg.ops_per_worker, "operations per worker");
    cmd->add_option("--sys-budget", f.cfg.sys_budget, "Sys operations");
    cmd->add_option("--depth", f.cfg.depth_limit, "step bound");
    cmd->add_option("--pt2", f.pt2, "PT2 variant")->check(CLI::IsMember({"corrected", "original"}));
    cmd->add_flag("--no-lin", f.no_lin, "skip linearization checks");
}

json config_json(const ExploreConfig& c) {
    return {{"workers", c.num_workers},
            {"keys", c.keys},
            {"ops", c.ops_per_worker},
            {"sys_budget", c.sys_budget},
            {"depth", c.depth_limit},
            {"pt2", to_string(c.pt2)},
            {"linearize", c.check_linearizability},
            {"max_states", c.max_states}};
}

json lin_json(const TraceCheckStats& s) {
    return {{"complete_ops", s.complete_ops},
            {"scans_validated", s.scans_validated},
            {"witnesses_found", s.witnesses_found},
            {"oracle_runs", s.oracle_runs}};
}

std::string file_safe(std::string name) {
    for (char& c : name)
        if (c == ':' || c == '/')
            c = '_';
    return name;
}

// Replayable script: check name and anchor up top, the violating state at the end.
std::string write_counterexample(const fs::path& dir, std::size_t n, int workers,
                                 const ViolationRecord& r) {
    fs::path path = dir / ("cex-" + std::to_string(n) + "-" + file_safe(r.violation.check_name) + ".script");
    std::ofstream out(path);
    Script sc;
    sc.num_workers = workers;
    sc.steps = r.script;
    std::string header = "check " + r.violation.check_name + "\nanchor " + r.violation.anchor +
                         "\n" + to_string(r.violation);
    write_script(out, sc, header);
    out << "# state after the last step\n";
    std::istringstream lines(r.state_text);
    for (std::string line; std::getline(lines, line);)
        out << "# " << line << '\n';
    return path.string();
}

json write_violations(std::ostream& out, const fs::path& dir, int workers,
                      const std::vector<ViolationRecord>& found, json& files) {
    json names = json::array();
    for (std::size_t i = 0; i < found.size(); ++i) {
        const auto& r = found[i];
        out << to_string(r.violation) << '\n';
        std::string path = write_counterexample(dir, i, workers, r);
        out << "  counterexample " << path << " (" << r.script.size() << " steps)\n";
        names.push_back(r.violation.check_name);
        files.push_back(path);
    }
    return names;
}

std::string node_list(const State& s, bool (*pred)(const State&, Address)) {
    std::string out = "[";
    bool first = true;
    for (std::uint32_t id = 2; id < s.alloc_counter(); ++id) {
        Address a{id};
        if (!pred(s, a))
            continue;
        out += (first ? "" : " ") + std::string("#") + std::to_string(id) + ":" + s.key(a).to_string();
        first = false;
    }
    return out + "]";
}

bool not_tree_like(const State& s, Address a) { return !is_tree_like(s, a); }
bool removed(const State& s, Address a) { return s.rem(a); }

std::string state_summary(const State& s, Pt2Variant pt2) {
    std::ostringstream out;
    auto reg = is_regular(s, pt2);
    out << "Set=" << to_string(compute_set(s)) << " regular=";
    if (reg.regular)
        out << "yes";
    else
        out << "no(" << reg.failed_clause << ")";
    out << " non-tree-like=" << node_list(s, not_tree_like)
        << " confluent=" << node_list(s, is_confluent) << " removed=" << node_list(s, removed);
    return out.str();
}

struct Context {
    std::ostream& out;
    std::ostream& err;
    fs::path dir;
    json manifest;

    int finish(int code) {
        manifest["exit_code"] = code;
        manifest["version"] = CFSET_VERSION;
        fs::create_directories(dir);
        fs::path path = dir / "manifest.json";
        std::ofstream(path) << manifest.dump(2) << '\n';
        spdlog::info("manifest {}", path.string());
        return code;
    }
};

int cmd_explore(Context& ctx, const ModelFlags& flags, std::size_t max_states, bool all) {
    ExploreConfig cfg = flags.resolved();
    cfg.max_states = max_states;
    cfg.stop_on_first_violation = !all;
    ctx.manifest["config"] = config_json(cfg);
    ctx.manifest["seed"] = nullptr;
    spdlog::info("explore {}", cfg.describe());

    std::size_t seen = 0;
    ExploreHooks hooks;
    hooks.on_state = [&](const State&) {
        if (++seen % 100000 == 0)
            spdlog::debug("{} states", seen);
    };
    ExplorationReport rep = explore(cfg, hooks);
    ctx.out << "explore " << cfg.describe() << '\n'
            << "states=" << rep.states_visited << " transitions=" << rep.transitions
            << " max-depth=" << rep.max_depth << " returns=" << rep.return_transitions
            << " complete-ops=" << rep.linearization.complete_ops
            << " scans=" << rep.linearization.scans_validated
            << " witnesses=" << rep.linearization.witnesses_found
            << " oracle-runs=" << rep.linearization.oracle_runs << '\n';
    json files = json::array();
    fs::create_directories(ctx.dir);
    json names = write_violations(ctx.out, ctx.dir, cfg.num_workers, rep.violations, files);
    if (rep.frontier_truncated)
        ctx.out << "INCOMPLETE frontier truncated at " << cfg.max_states << " states\n";
    ctx.manifest["outcome"] = {{"states", rep.states_visited},
                               {"transitions", rep.transitions},
                               {"max_depth", rep.max_depth},
                               {"truncated", rep.frontier_truncated},
                               {"linearization", lin_json(rep.linearization)},
                               {"violations", names}};
    ctx.manifest["files"] = files;
    return ctx.finish(rep.clean() ? kClean : kViolation);
}

int cmd_replay(Context& ctx, const std::string& path, const std::string& pt2_text,
               const std::vector<std::uint32_t>& keys, bool no_lin) {
    ctx.manifest["config"] = {{"script", path}, {"pt2", pt2_text}, {"keys", keys}, {"linearize", !no_lin}};
    ctx.manifest["seed"] = nullptr;
    if (!fs::exists(path)) {
        ctx.err << "no such script: " << path << '\n';
        return kUsage;
    }
    Pt2Variant pt2 = *parse_pt2_variant(pt2_text);
    Script sc;
    try {
        sc = load_script(path);
    } catch (const std::invalid_argument& e) {
        ctx.out << "MALFORMED " << e.what() << '\n';
        ctx.manifest["outcome"] = {{"error", e.what()}};
        return ctx.finish(kViolation);
    }
    Trace t;
    try {
        t = replay(sc.num_workers, sc.steps);
    } catch (const ReplayError& e) {
        ctx.out << "NOT ENABLED step " << e.index() << " (" << to_string(sc.steps[e.index()])
                << "): " << e.what() << '\n';
        ctx.manifest["outcome"] = {{"error", e.what()}, {"step", e.index()}};
        return ctx.finish(kViolation);
    }

    std::map<std::size_t, std::vector<std::string>> marks_at;
    for (const auto& name : sc.mark_order)
        marks_at[sc.marks.at(name)].push_back(name);
    for (std::size_t i = 0; i < t.states.size(); ++i) {
        ctx.out << "M_" << i;
        if (auto it = marks_at.find(i); it != marks_at.end())
            for (const auto& m : it->second)
                ctx.out << " [" << m << "]";
        ctx.out << (i == 0 ? " initial" : " after " + to_string(t.labels[i - 1])) << '\n'
                << "  " << state_summary(t.states[i], pt2) << '\n';
    }

    CheckConfig cc;
    cc.pt2 = pt2;
    cc.keys = keys;
    TraceCheckStats stats;
    auto found = check_recorded_trace(t, cc, !no_lin, &stats);
    json files = json::array();
    fs::create_directories(ctx.dir);
    json names = write_violations(ctx.out, ctx.dir, sc.num_workers, found, files);
    if (!no_lin) {
        fs::path report = ctx.dir / "linearization.txt";
        std::ofstream(report) << linearization_report(t);
        files.push_back(report.string());
    }
    ctx.out << "steps=" << t.size() << " complete-ops=" << stats.complete_ops
            << " violations=" << found.size() << '\n';
    ctx.manifest["outcome"] = {{"steps", t.size()},
                               {"final_set", compute_set(t.back())},
                               {"final_digest", digest_hex(t.back())},
                               {"linearization", lin_json(stats)},
                               {"violations", names}};
    ctx.manifest["files"] = files;
    return ctx.finish(found.empty() ? kClean : kViolation);
}

int cmd_walk(Context& ctx, const ModelFlags& flags, const WalkConfig& walk) {
    ExploreConfig cfg = flags.resolved();
    ctx.manifest["config"] = config_json(cfg);
    ctx.manifest["config"]["walks"] = walk.walks;
    ctx.manifest["config"]["length"] = walk.walk_length;
    ctx.manifest["seed"] = walk.seed;
    WalkReport rep = check_walks(cfg, walk);
    ctx.out << "walks=" << rep.walks << " steps=" << rep.steps
            << " complete-ops=" << rep.linearization.complete_ops
            << " oracle-runs=" << rep.linearization.oracle_runs << '\n';
    json files = json::array();
    fs::create_directories(ctx.dir);
    json names = write_violations(ctx.out, ctx.dir, cfg.num_workers, rep.violations, files);
    ctx.manifest["outcome"] = {{"walks", rep.walks},
                               {"steps", rep.steps},
                               {"linearization", lin_json(rep.linearization)},
                               {"violations", names}};
    ctx.manifest["files"] = files;
    return ctx.finish(rep.violations.empty() ? kClean : kViolation);
}

void write_history(const fs::path& path, const std::vector<runtime::HistoryEvent>& events) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path);
    for (const auto& e : events)
        out << runtime::to_string(e) << '\n';
}

int cmd_stress(Context& ctx, const runtime::StressConfig& cfg, std::string history) {
    if (history.empty())
        history = (ctx.dir / "history.txt").string();
    ctx.manifest["config"] = {{"threads", cfg.threads},
                              {"ops", cfg.ops_per_thread},
                              {"keys", cfg.keys},
                              {"maintenance", cfg.maintenance},
                              {"deterministic", cfg.deterministic},
                              {"yield", cfg.yield_probability}};
    ctx.manifest["seed"] = cfg.seed;
    ctx.manifest["files"] = {history};
    runtime::StressResult res;
    try {
        res = runtime::stress(cfg);
    } catch (const runtime::StressFault& e) {
        write_history(history, e.partial_history());
        ctx.err << "thread failure: " << e.what() << '\n';
        ctx.manifest["outcome"] = {{"error", e.what()}};
        return ctx.finish(kInternal);
    }
    write_history(history, res.history);
    const auto& v = res.verdict;
    ctx.out << "stress threads=" << cfg.threads << " ops=" << cfg.ops_per_thread << " keys=" << cfg.keys
            << " seed=" << cfg.seed << (cfg.deterministic ? " deterministic" : "") << '\n'
            << "operations=" << v.operations << " windows=" << v.windows
            << " brute-force-windows=" << v.brute_force_windows << " maintenance-ops=" << v.maintenance_ops
            << " snapshots=" << v.snapshots << " final=" << to_string(v.final_set) << '\n';
    for (const auto& f : v.failures)
        ctx.out << "FAILURE " << f << '\n';
    ctx.out << "verdict " << (v.ok ? "pass" : "fail") << '\n';
    ctx.manifest["outcome"] = {{"ok", v.ok},
                               {"operations", v.operations},
                               {"windows", v.windows},
                               {"brute_force_windows", v.brute_force_windows},
                               {"maintenance_ops", v.maintenance_ops},
                               {"snapshots", v.snapshots},
                               {"final_set", v.final_set},
                               {"failures", v.failures}};
    return ctx.finish(v.ok ? kClean : kViolation);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Contention-friendly BST set: model checker, trace replayer and stress harness"};
    app.require_subcommand(1);
    std::string out_dir = "cfset-out";
    app.add_option("--out", out_dir, "directory for manifest, counterexamples and histories");

    auto* explore_cmd = app.add_subcommand("explore", "bounded exhaustive exploration");
    ModelFlags explore_flags;
    std::size_t max_states = 20'000'000;
    bool all = false;
    add_model_flags(explore_cmd, explore_flags);
    explore_cmd->add_option("--max-states", max_states);
    explore_cmd->add_flag("--all", all, "keep going after the first violation");

    auto* replay_cmd = app.add_subcommand("replay", "replay a script and check every step");
    std::string script, replay_pt2 = "corrected";
    std::vector<std::uint32_t> replay_keys;
    bool replay_no_lin = false;
    replay_cmd->add_option("--script,script", script)->required();
    replay_cmd->add_option("--pt2", replay_pt2)->check(CLI::IsMember({"corrected", "original"}));
    replay_cmd->add_option("--keys", replay_keys)->delimiter(',');
    replay_cmd->add_flag("--no-lin", replay_no_lin);

    auto* walk_cmd = app.add_subcommand("walk", "seeded random walks through the model");
    ModelFlags walk_flags;
    WalkConfig walk{0, 100, 60};
    add_model_flags(walk_cmd, walk_flags);
    walk_cmd->add_option("--seed", walk.seed);
    walk_cmd->add_option("--walks", walk.walks);
    walk_cmd->add_option("--len", walk.walk_length);

    auto* stress_cmd = app.add_subcommand("stress", "concurrent runtime with history checking");
    runtime::StressConfig stress_cfg;
    std::string maintenance = "on", history;
    stress_cmd->add_option("--threads", stress_cfg.threads)->check(CLI::Range(1, 256));
    stress_cmd->add_option("--ops", stress_cfg.ops_per_thread, "operations per thread");
    stress_cmd->add_option("--keys", stress_cfg.keys, "keys 1..N")->check(CLI::Range(1u, 1u << 20));
    stress_cmd->add_option("--seed", stress_cfg.seed);
    stress_cmd->add_option("--maintenance", maintenance)->check(CLI::IsMember({"on", "off"}));
    stress_cmd->add_flag("--deterministic", stress_cfg.deterministic, "single OS thread, seeded scheduler");
    stress_cmd->add_option("--yield", stress_cfg.yield_probability)->check(CLI::Range(0.0, 1.0));
    stress_cmd->add_option("--history", history, "history file");

    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kClean : kUsage;
    }

    Context ctx{out, err, out_dir, json::object()};
    ctx.manifest["command"] = app.get_subcommands().front()->get_name();
    ctx.manifest["argv"] = args;
    try {
        if (explore_cmd->parsed())
            return cmd_explore(ctx, explore_flags, max_states, all);
        if (replay_cmd->parsed())
            return cmd_replay(ctx, script, replay_pt2, replay_keys, replay_no_lin);
        if (walk_cmd->parsed())
            return cmd_walk(ctx, walk_flags, walk);
        stress_cfg.maintenance = maintenance == "on";
        return cmd_stress(ctx, stress_cfg, history);
    } catch (const std::exception& e) {
        err << "internal fault: " << e.what() << '\n';
        ctx.manifest["outcome"] = {{"error", e.what()}};
        try {
            return ctx.finish(kInternal);
        } catch (...) {
            return kInternal;
        }
    }
}

}  // namespace cfset::cli
