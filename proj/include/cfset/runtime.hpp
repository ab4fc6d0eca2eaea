#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfset/linearize.hpp"
#include "cfset/semantics.hpp"
#include "cfset/state.hpp"

namespace cfset::runtime {

struct Node {
    Node(KeyValue k, Node* l, Node* r, bool d) : key(k), left(l), right(r), del(d) {}

    const KeyValue key;
    std::atomic<Node*> left;
    std::atomic<Node*> right;
    std::atomic<bool> del;
    std::atomic<bool> rem{false};
    std::mutex lock;

    Node* lr(bool go_left) const { return go_left ? left.load() : right.load(); }
};

enum class Rotation { None, Left, Right };

// Subtree heights of the path-connected tree, keyed by node.
struct TreeView {
    std::function<int(const Node*)> height;
};

using BalancePolicy = std::function<Rotation(const Node* nd, const TreeView& view)>;

// Rotate toward the shorter side once the heights differ by two or more.
Rotation height_policy(const Node* nd, const TreeView& view);

struct SnapshotReport {
    bool ok = true;
    std::string problem;
    std::size_t reachable = 0;
    KeySet set;
};

class ConcurrentSet {
  public:
    ConcurrentSet();
    ConcurrentSet(const ConcurrentSet&) = delete;
    ConcurrentSet& operator=(const ConcurrentSet&) = delete;

    bool contains(std::uint32_t k) const;
    bool insert(std::uint32_t k);
    bool erase(std::uint32_t k);

    // Single maintenance context only. Returns the number of structural operations.
    std::size_t maintenance_pass(const BalancePolicy& policy = height_policy);

    // Individual Sys operations; false when a prerequisite or a lock is unavailable.
    bool rotate_left(Node* prt0, bool lft0);
    bool rotate_right(Node* prt0, bool lft0);
    bool remove(Node* prt0, bool lft0);

    // Quiescent use only: unique-key BST over reachable nodes, removed nodes focused.
    SnapshotReport snapshot() const;

    // Called at every traversal step and between the steps of a Sys operation.
    void set_pause_hook(std::function<void()> hook) { pause_ = std::move(hook); }

    Node* root() const { return root_; }
    Node* bot() const { return bot_; }
    std::size_t allocated() const;

  private:
    Node* make(KeyValue k, Node* l, Node* r, bool del);
    void pause() const {
        if (pause_)
            pause_();
    }

    mutable std::mutex alloc_mutex_;
    std::deque<std::unique_ptr<Node>> nodes_;
    Node* root_;
    Node* bot_;
    std::function<void()> pause_;
};

enum class EventKind { Invoke, Respond };

struct HistoryEvent {
    std::uint64_t seq = 0;
    int tid = 0;
    EventKind event = EventKind::Invoke;
    OperationKind op = OperationKind::Contains;
    std::uint32_t key = 0;
    bool result = false;
};

std::string to_string(const HistoryEvent& e);
HistoryEvent parse_history_event(const std::string& line);

class HistoryLog {
  public:
    explicit HistoryLog(int threads);
    std::uint64_t invoke(int tid, OperationKind op, std::uint32_t key);
    void respond(int tid, OperationKind op, std::uint32_t key, bool result);
    // Merged in sequence order; call after all threads have joined.
    std::vector<HistoryEvent> events() const;

  private:
    std::atomic<std::uint64_t> seq_{0};
    std::vector<std::vector<HistoryEvent>> per_thread_;
};

// Completed operations, paired by thread; throws on malformed histories.
std::vector<TimedOp> history_ops(const std::vector<HistoryEvent>& events);

struct StressConfig {
    int threads = 4;
    std::size_t ops_per_thread = 200;
    std::uint32_t keys = 8;
    bool maintenance = true;
    std::uint64_t seed = 7;
    // One OS thread; a seeded scheduler interleaves whole operations and maintenance passes.
    bool deterministic = false;
    // Real-thread mode: chance of yielding at each pause point, to force interleavings.
    double yield_probability = 0.2;
};

struct StressVerdict {
    bool ok = true;
    std::vector<std::string> failures;
    std::size_t operations = 0;
    std::size_t windows = 0;
    std::size_t brute_force_windows = 0;
    std::size_t maintenance_ops = 0;
    std::size_t snapshots = 0;
    KeySet final_set;
};

struct StressResult {
    std::vector<HistoryEvent> history;
    StressVerdict verdict;
};

// Per-key windows split at quiescent cuts; windows of at most 8 operations also go
// through the brute-force oracle. The final set must be a reachable outcome.
StressVerdict check_history(const std::vector<HistoryEvent>& history, const KeySet& final_set);

// A worker or the maintainer threw; carries the events logged so far.
class StressFault : public std::runtime_error {
  public:
    StressFault(const std::string& what, std::vector<HistoryEvent> partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const std::vector<HistoryEvent>& partial_history() const { return partial_; }

  private:
    std::vector<HistoryEvent> partial_;
};

StressResult stress(const StressConfig& config);

}  // namespace cfset::runtime
