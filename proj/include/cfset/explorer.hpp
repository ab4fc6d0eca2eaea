#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cfset/checker.hpp"
#include "cfset/linearize.hpp"
#include "cfset/semantics.hpp"
#include "cfset/state.hpp"
#include "cfset/trace.hpp"

namespace cfset {

struct ExploreConfig {
    int num_workers = 1;
    std::vector<std::uint32_t> keys{1};
    std::uint32_t ops_per_worker = 1;
    std::uint32_t sys_budget = 0;
    std::uint32_t depth_limit = 8;
    Pt2Variant pt2 = Pt2Variant::Corrected;
    // Guard against running out of memory; exceeding it truncates the frontier.
    std::size_t max_states = 20'000'000;
    // Linearization checks on every transition that ends a worker operation.
    bool check_linearizability = false;
    // Keep exploring after a violation, recording the first one per rule.
    bool stop_on_first_violation = true;

    ModelBounds bounds() const { return {keys, ops_per_worker, sys_budget}; }
    CheckConfig check_config() const;
    std::string describe() const;
};

struct ViolationRecord {
    Violation violation;
    std::vector<StepLabel> script;   // replays to the violating state
    std::string state_text;          // canonical text of the violating state
};

struct ExplorationReport {
    std::size_t states_visited = 0;
    std::size_t transitions = 0;
    std::size_t max_depth = 0;
    std::size_t return_transitions = 0;
    TraceCheckStats linearization;
    std::vector<ViolationRecord> violations;
    bool frontier_truncated = false;

    bool clean() const { return violations.empty() && !frontier_truncated; }
};

struct ExploreHooks {
    std::function<void(const State&)> on_state;
    // Trace to the post-state of every transition that ends a worker operation.
    std::function<void(const Trace&)> on_return_trace;
};

ExplorationReport explore(const ExploreConfig& config, const ExploreHooks& hooks = {});

struct WalkConfig {
    std::uint64_t seed = 0;
    std::size_t walks = 1;
    std::size_t walk_length = 50;
};

struct WalkReport {
    std::size_t walks = 0;
    std::size_t steps = 0;
    TraceCheckStats linearization;
    std::vector<ViolationRecord> violations;
};

// One seeded walk; uniform choice among enabled labels at each step.
Trace random_trace(const ExploreConfig& config, std::uint64_t seed, std::size_t walk_length);

std::vector<Trace> random_walk(const ExploreConfig& config, const WalkConfig& walk);

// Runs state, step and linearization checks over each walk.
WalkReport check_walks(const ExploreConfig& config, const WalkConfig& walk,
                       const std::function<void(const Trace&)>& on_trace = {});

// Full check suite over a recorded trace; violations carry the prefix script.
std::vector<ViolationRecord> check_recorded_trace(const Trace& trace, const CheckConfig& cfg,
                                                  bool linearize, TraceCheckStats* stats = nullptr);

}  // namespace cfset
