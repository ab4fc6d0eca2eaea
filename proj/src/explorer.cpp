#include "cfset/explorer.hpp"

#include <algorithm>
#include <deque>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cfset/digest.hpp"

namespace cfset {

namespace {

struct Entry {
    std::uint32_t parent;
    StepLabel label;
    std::uint32_t depth;
};

std::vector<StepLabel> path_to(const std::vector<Entry>& entries, std::uint32_t idx) {
    std::vector<StepLabel> out;
    while (idx != 0) {
        out.push_back(entries[idx].label);
        idx = entries[idx].parent;
    }
    return {out.rbegin(), out.rend()};
}

class Recorder {
  public:
    Recorder(std::vector<ViolationRecord>& out, bool first_only) : out_(out), first_only_(first_only) {}

    // Returns true once exploration should stop.
    bool add(std::vector<Violation> found, const std::function<std::vector<StepLabel>()>& script,
             const State& state, const State* pre = nullptr) {
        for (auto& v : found) {
            if (seen_.count(v.check_name))
                continue;
            seen_.insert(v.check_name);
            if (pre)
                v.pre_digest = digest_hex(*pre);
            v.post_digest = digest_hex(state);
            out_.push_back(ViolationRecord{std::move(v), script(), canonical_text(state)});
        }
        return first_only_ && !out_.empty();
    }

  private:
    std::vector<ViolationRecord>& out_;
    bool first_only_;
    std::set<std::string> seen_;
};

}  // namespace

CheckConfig ExploreConfig::check_config() const {
    CheckConfig cfg;
    cfg.pt2 = pt2;
    cfg.keys = keys;
    return cfg;
}

std::string ExploreConfig::describe() const {
    std::ostringstream out;
    out << "workers=" << num_workers << " keys=";
    for (std::size_t i = 0; i < keys.size(); ++i)
        out << (i ? "," : "") << keys[i];
    out << " ops=" << ops_per_worker << " sys-budget=" << sys_budget << " depth=" << depth_limit
        << " pt2=" << to_string(pt2);
    return out.str();
}

ExplorationReport explore(const ExploreConfig& config, const ExploreHooks& hooks) {
    ExplorationReport report;
    const CheckConfig cfg = config.check_config();
    const ModelBounds bounds = config.bounds();
    Recorder recorder(report.violations, config.stop_on_first_violation);

    std::vector<Entry> entries;
    std::unordered_map<std::string, std::uint32_t> visited;
    std::deque<std::pair<State, std::uint32_t>> frontier;

    State init = initial_state(config.num_workers);
    entries.push_back(Entry{0, StepLabel{}, 0});
    visited.emplace(canonical_form(init), 0);
    {
        Analysis a(init, cfg);
        if (hooks.on_state)
            hooks.on_state(init);
        if (recorder.add(check_state(a), [] { return std::vector<StepLabel>{}; }, init)) {
            report.states_visited = 1;
            return report;
        }
    }
    frontier.emplace_back(std::move(init), 0);

    while (!frontier.empty()) {
        auto [s, idx] = std::move(frontier.front());
        frontier.pop_front();
        const std::uint32_t depth = entries[idx].depth;
        if (depth >= config.depth_limit)
            continue;
        Analysis pre(s, cfg);
        for (const StepLabel& label : enabled_steps(s, bounds)) {
            State post = apply_step(s, label);
            ++report.transitions;
            std::string canon = canonical_form(post);
            auto [it, fresh] = visited.try_emplace(std::move(canon), 0);
            if (fresh) {
                if (visited.size() > config.max_states) {
                    visited.erase(it);
                    report.frontier_truncated = true;
                    continue;
                }
                it->second = static_cast<std::uint32_t>(entries.size());
                entries.push_back(Entry{idx, label, depth + 1});
                report.max_depth = std::max<std::size_t>(report.max_depth, depth + 1);
            }
            auto script = [&] {
                auto p = path_to(entries, idx);
                p.push_back(label);
                return p;
            };
            Analysis post_a(post, cfg);
            std::vector<Violation> found = check_step(pre, label, post_a);
            if (fresh) {
                auto more = check_state(post_a);
                found.insert(found.end(), more.begin(), more.end());
            }
            if ((config.check_linearizability || hooks.on_return_trace) && label.process != kSys &&
                is_return(label)) {
                ++report.return_transitions;
                Trace t = replay(config.num_workers, script());
                if (config.check_linearizability) {
                    auto more = check_trace(t, config.pt2, &report.linearization, config.keys);
                    found.insert(found.end(), more.begin(), more.end());
                }
                if (hooks.on_return_trace)
                    hooks.on_return_trace(t);
            }
            if (!found.empty() && recorder.add(std::move(found), script, post, &s)) {
                report.states_visited = visited.size();
                return report;
            }
            if (fresh) {
                if (hooks.on_state)
                    hooks.on_state(post);
                frontier.emplace_back(std::move(post), it->second);
            }
        }
    }
    report.states_visited = visited.size();
    return report;
}

Trace random_trace(const ExploreConfig& config, std::uint64_t seed, std::size_t walk_length) {
    std::mt19937_64 rng(seed);
    Trace t;
    t.states.push_back(initial_state(config.num_workers));
    const ModelBounds bounds = config.bounds();
    for (std::size_t i = 0; i < walk_length; ++i) {
        auto labels = enabled_steps(t.states.back(), bounds);
        if (labels.empty())
            break;
        std::uniform_int_distribution<std::size_t> pick(0, labels.size() - 1);
        const StepLabel& label = labels[pick(rng)];
        t.states.push_back(apply_step(t.states.back(), label));
        t.labels.push_back(label);
    }
    return t;
}

namespace {

std::uint64_t walk_seed(std::uint64_t seed, std::size_t i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

std::vector<Trace> random_walk(const ExploreConfig& config, const WalkConfig& walk) {
    std::vector<Trace> out;
    for (std::size_t i = 0; i < walk.walks; ++i)
        out.push_back(random_trace(config, walk_seed(walk.seed, i), walk.walk_length));
    return out;
}

std::vector<ViolationRecord> check_recorded_trace(const Trace& trace, const CheckConfig& cfg,
                                                  bool linearize, TraceCheckStats* stats) {
    std::vector<ViolationRecord> out;
    Recorder recorder(out, false);
    auto prefix = [&](std::size_t n) {
        return std::vector<StepLabel>(trace.labels.begin(), trace.labels.begin() + static_cast<std::ptrdiff_t>(n));
    };
    auto pre = std::make_unique<Analysis>(trace.states[0], cfg);
    recorder.add(check_state(*pre), [&] { return prefix(0); }, trace.states[0]);
    for (std::size_t i = 0; i < trace.labels.size(); ++i) {
        auto post = std::make_unique<Analysis>(trace.states[i + 1], cfg);
        auto found = check_step(*pre, trace.labels[i], *post);
        auto more = check_state(*post);
        found.insert(found.end(), more.begin(), more.end());
        recorder.add(std::move(found), [&] { return prefix(i + 1); }, trace.states[i + 1],
                     &trace.states[i]);
        pre = std::move(post);
    }
    if (linearize)
        recorder.add(check_trace(trace, cfg.pt2, stats, cfg.keys),
                     [&] { return prefix(trace.labels.size()); }, trace.back());
    return out;
}

WalkReport check_walks(const ExploreConfig& config, const WalkConfig& walk,
                       const std::function<void(const Trace&)>& on_trace) {
    WalkReport report;
    const CheckConfig cfg = config.check_config();
    for (std::size_t i = 0; i < walk.walks; ++i) {
        Trace t = random_trace(config, walk_seed(walk.seed, i), walk.walk_length);
        ++report.walks;
        report.steps += t.labels.size();
        auto found = check_recorded_trace(t, cfg, true, &report.linearization);
        report.violations.insert(report.violations.end(), found.begin(), found.end());
        if (on_trace)
            on_trace(t);
    }
    return report;
}

}  // namespace cfset
