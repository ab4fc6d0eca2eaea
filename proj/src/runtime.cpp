#include "cfset/runtime.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace cfset::runtime {

namespace {

bool goes_left(std::uint32_t k, const Node* nd) {
    return KeyValue::fin(k) < nd->key;
}

bool matches(std::uint32_t k, const Node* nd) {
    return KeyValue::fin(k) == nd->key;
}

void set_lr(Node* x, bool left, Node* y) {
    (left ? x->left : x->right).store(y);
}

// Locks acquired by a Sys operation, released together.
class LockSet {
  public:
    bool try_add(Node* x) {
        if (std::find(held_.begin(), held_.end(), x) != held_.end())
            return false;
        if (!x->lock.try_lock())
            return false;
        held_.push_back(x);
        return true;
    }
    void adopt(Node* x) { held_.push_back(x); }
    ~LockSet() {
        for (Node* x : held_)
            x->lock.unlock();
    }

  private:
    std::vector<Node*> held_;
};

}  // namespace

Rotation height_policy(const Node* nd, const TreeView& view) {
    const Node* l = nd->left.load();
    const Node* r = nd->right.load();
    int hl = view.height(l);
    int hr = view.height(r);
    // A single rotation cannot fix a zig-zag; rotating anyway would flip back next pass.
    if (hr - hl >= 2 && view.height(r->right.load()) >= view.height(r->left.load()))
        return Rotation::Left;
    if (hl - hr >= 2 && view.height(l->left.load()) >= view.height(l->right.load()))
        return Rotation::Right;
    return Rotation::None;
}

ConcurrentSet::ConcurrentSet() {
    bot_ = make(KeyValue::neg_inf(), nullptr, nullptr, false);
    bot_->left = bot_;
    bot_->right = bot_;
    root_ = make(KeyValue::pos_inf(), bot_, nullptr, false);
    root_->right = root_;
}

Node* ConcurrentSet::make(KeyValue k, Node* l, Node* r, bool del) {
    std::lock_guard guard(alloc_mutex_);
    nodes_.push_back(std::make_unique<Node>(k, l, r, del));
    return nodes_.back().get();
}

std::size_t ConcurrentSet::allocated() const {
    std::lock_guard guard(alloc_mutex_);
    return nodes_.size();
}

bool ConcurrentSet::contains(std::uint32_t k) const {
    Node* nxt = root_;
    for (;;) {
        pause();
        if (nxt == bot_)
            return false;
        Node* nd = nxt;
        if (matches(k, nd))
            return !nd->del.load();
        nxt = nd->lr(goes_left(k, nd));
    }
}

bool ConcurrentSet::erase(std::uint32_t k) {
    Node* nxt = root_;
    for (;;) {
        pause();
        if (nxt == bot_)
            return false;
        Node* nd = nxt;
        if (!matches(k, nd)) {
            nxt = nd->lr(goes_left(k, nd));
            continue;
        }
        std::lock_guard guard(nd->lock);
        pause();
        if (nd->del.load())
            return false;
        if (nd->rem.load()) {
            nxt = nd->right.load();
            continue;
        }
        nd->del = true;
        return true;
    }
}

bool ConcurrentSet::insert(std::uint32_t k) {
    Node* nd = root_;
    Node* nxt = root_;
    for (;;) {
        pause();
        if (nxt == bot_) {
            std::lock_guard guard(nd->lock);
            pause();
            bool left = goes_left(k, nd);
            Node* child = nd->lr(left);
            if (child != bot_) {
                nxt = child;
                continue;
            }
            set_lr(nd, left, make(KeyValue::fin(k), bot_, bot_, false));
            return true;
        }
        nd = nxt;
        if (!matches(k, nd)) {
            nxt = nd->lr(goes_left(k, nd));
            continue;
        }
        std::lock_guard guard(nd->lock);
        pause();
        if (!nd->del.load())
            return false;
        if (nd->rem.load()) {
            nxt = nd->right.load();
            continue;
        }
        nd->del = false;
        return true;
    }
}

bool ConcurrentSet::rotate_left(Node* prt0, bool lft0) {
    LockSet locks;
    if (prt0 == bot_ || !locks.try_add(prt0) || prt0->rem.load())
        return false;
    Node* nd0 = prt0->lr(lft0);
    if (nd0 == root_ || nd0 == bot_ || nd0 == prt0 || !locks.try_add(nd0) || nd0->rem.load())
        return false;
    Node* r0 = nd0->right.load();
    if (r0 == bot_ || !locks.try_add(r0) || r0->rem.load())
        return false;
    Node* rl0 = r0->left.load();
    Node* l0 = nd0->left.load();

    Node* fresh = make(nd0->key, l0, rl0, nd0->del.load());
    fresh->lock.lock();
    locks.adopt(fresh);
    r0->left = fresh;          // f6
    pause();
    nd0->left = r0;            // f7
    pause();
    set_lr(prt0, lft0, r0);    // f8
    pause();
    nd0->rem = true;           // f9
    return true;
}

bool ConcurrentSet::rotate_right(Node* prt0, bool lft0) {
    LockSet locks;
    if (prt0 == bot_ || !locks.try_add(prt0) || prt0->rem.load())
        return false;
    Node* nd0 = prt0->lr(lft0);
    if (nd0 == root_ || nd0 == bot_ || nd0 == prt0 || !locks.try_add(nd0) || nd0->rem.load())
        return false;
    Node* l0 = nd0->left.load();
    if (l0 == bot_ || !locks.try_add(l0) || l0->rem.load())
        return false;
    Node* lr0 = l0->right.load();
    Node* r0 = nd0->right.load();

    Node* fresh = make(nd0->key, lr0, r0, nd0->del.load());
    fresh->lock.lock();
    locks.adopt(fresh);
    l0->right = fresh;         // r6
    pause();
    nd0->right = l0;           // r7
    pause();
    set_lr(prt0, lft0, l0);    // r8
    pause();
    nd0->rem = true;           // r9
    return true;
}

bool ConcurrentSet::remove(Node* prt0, bool lft0) {
    LockSet locks;
    if (prt0 == bot_ || !locks.try_add(prt0) || prt0->rem.load())
        return false;
    Node* nd0 = prt0->lr(lft0);
    if (nd0 == root_ || nd0 == bot_ || nd0 == prt0 || !locks.try_add(nd0) || nd0->rem.load())
        return false;
    Node* l = nd0->left.load();
    Node* r = nd0->right.load();
    if (!nd0->del.load() || (l != bot_ && r != bot_))
        return false;
    Node* chd0 = l != bot_ ? l : r;

    set_lr(prt0, lft0, chd0);  // v6
    pause();
    if (nd0->left.load() == bot_)
        nd0->left = prt0;      // v7
    else
        nd0->right = prt0;
    pause();
    if (nd0->left.load() == prt0)
        nd0->right = prt0;     // v8
    else
        nd0->left = prt0;
    pause();
    nd0->rem = true;           // v9
    return true;
}

std::size_t ConcurrentSet::maintenance_pass(const BalancePolicy& policy) {
    // Unlocked walk for candidates; every operation re-checks under its locks.
    std::vector<Node*> order;
    std::unordered_set<const Node*> seen{bot_};
    std::vector<Node*> stack{root_};
    while (!stack.empty()) {
        Node* x = stack.back();
        stack.pop_back();
        if (!seen.insert(x).second)
            continue;
        order.push_back(x);
        stack.push_back(x->left.load());
        stack.push_back(x->right.load());
    }
    std::unordered_map<const Node*, int> heights;
    std::function<int(const Node*)> height = [&](const Node* x) -> int {
        if (x == bot_ || x == root_)
            return 0;
        if (auto it = heights.find(x); it != heights.end())
            return it->second;
        heights[x] = 0;  // cut cycles seen mid-rotation
        int h = 1 + std::max(height(x->left.load()), height(x->right.load()));
        heights[x] = h;
        return h;
    };
    TreeView view{height};

    std::size_t done = 0;
    std::unordered_set<const Node*> touched;
    for (Node* prt : order) {
        for (bool lft : {true, false}) {
            Node* nd = prt->lr(lft);
            if (nd == root_ || nd == bot_ || nd == prt || touched.count(nd) || touched.count(prt))
                continue;
            bool ok = false;
            if (nd->del.load() && (nd->left.load() == bot_ || nd->right.load() == bot_)) {
                ok = remove(prt, lft);
            } else {
                switch (policy(nd, view)) {
                case Rotation::Left: ok = rotate_left(prt, lft); break;
                case Rotation::Right: ok = rotate_right(prt, lft); break;
                case Rotation::None: break;
                }
            }
            if (ok) {
                ++done;
                touched.insert(nd);
                touched.insert(prt);
            }
        }
    }
    return done;
}

SnapshotReport ConcurrentSet::snapshot() const {
    SnapshotReport rep;
    auto fail = [&](std::string why) {
        if (rep.ok) {
            rep.ok = false;
            rep.problem = std::move(why);
        }
    };
    if (root_->right.load() != root_)
        fail("Right(root) != root");
    std::unordered_set<const Node*> seen;
    struct Item {
        const Node* x;
        KeyValue lo, hi;
    };
    std::vector<Item> stack{{root_->left.load(), KeyValue::neg_inf(), KeyValue::pos_inf()}};
    while (!stack.empty()) {
        auto [x, lo, hi] = stack.back();
        stack.pop_back();
        if (x == bot_)
            continue;
        if (!seen.insert(x).second) {
            fail("node " + x->key.to_string() + " reachable twice");
            continue;
        }
        if (!(lo < x->key && x->key < hi))
            fail("key " + x->key.to_string() + " outside (" + lo.to_string() + "," + hi.to_string() + ")");
        if (x->rem.load())
            fail("removed node " + x->key.to_string() + " is reachable");
        if (!x->del.load())
            rep.set.insert(x->key.value());
        stack.push_back({x->left.load(), lo, x->key});
        stack.push_back({x->right.load(), x->key, hi});
    }
    rep.reachable = seen.size();
    std::lock_guard guard(alloc_mutex_);
    for (const auto& n : nodes_) {
        if (!n->rem.load())
            continue;
        if (n->left.load() != n->right.load() || n->left.load() == bot_)
            fail("removed node " + n->key.to_string() + " is not focused");
    }
    return rep;
}

std::string to_string(const HistoryEvent& e) {
    std::ostringstream out;
    out << e.seq << ' ' << e.tid << ' ' << (e.event == EventKind::Invoke ? "Invoke" : "Respond")
        << ' ' << cfset::to_string(e.op) << ' ' << e.key;
    if (e.event == EventKind::Respond)
        out << ' ' << (e.result ? "true" : "false");
    return out.str();
}

HistoryEvent parse_history_event(const std::string& line) {
    std::istringstream in(line);
    HistoryEvent e;
    std::string event, op;
    if (!(in >> e.seq >> e.tid >> event >> op >> e.key))
        throw std::invalid_argument("bad history line: " + line);
    if (event == "Invoke")
        e.event = EventKind::Invoke;
    else if (event == "Respond")
        e.event = EventKind::Respond;
    else
        throw std::invalid_argument("bad event kind: " + event);
    if (op == "contains")
        e.op = OperationKind::Contains;
    else if (op == "insert")
        e.op = OperationKind::Insert;
    else if (op == "delete")
        e.op = OperationKind::Delete;
    else
        throw std::invalid_argument("bad operation: " + op);
    if (e.event == EventKind::Respond) {
        std::string b;
        if (!(in >> b) || (b != "true" && b != "false"))
            throw std::invalid_argument("bad result: " + line);
        e.result = b == "true";
    }
    return e;
}

HistoryLog::HistoryLog(int threads) : per_thread_(static_cast<std::size_t>(threads)) {}

std::uint64_t HistoryLog::invoke(int tid, OperationKind op, std::uint32_t key) {
    std::uint64_t s = seq_.fetch_add(1);
    per_thread_[static_cast<std::size_t>(tid)].push_back({s, tid, EventKind::Invoke, op, key, false});
    return s;
}

void HistoryLog::respond(int tid, OperationKind op, std::uint32_t key, bool result) {
    std::uint64_t s = seq_.fetch_add(1);
    per_thread_[static_cast<std::size_t>(tid)].push_back({s, tid, EventKind::Respond, op, key, result});
}

std::vector<HistoryEvent> HistoryLog::events() const {
    std::vector<HistoryEvent> all;
    for (const auto& t : per_thread_)
        all.insert(all.end(), t.begin(), t.end());
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
    return all;
}

std::vector<TimedOp> history_ops(const std::vector<HistoryEvent>& events) {
    std::map<int, HistoryEvent> open;
    std::vector<TimedOp> ops;
    for (const auto& e : events) {
        if (e.event == EventKind::Invoke) {
            if (!open.emplace(e.tid, e).second)
                throw std::invalid_argument("thread " + std::to_string(e.tid) + " invokes twice");
            continue;
        }
        auto it = open.find(e.tid);
        if (it == open.end() || it->second.op != e.op || it->second.key != e.key)
            throw std::invalid_argument("unmatched response at seq " + std::to_string(e.seq));
        ops.push_back(TimedOp{e.op, e.key, it->second.seq, e.seq, e.result});
        open.erase(it);
    }
    if (!open.empty())
        throw std::invalid_argument("history ends with pending operations");
    return ops;
}

StressVerdict check_history(const std::vector<HistoryEvent>& history, const KeySet& final_set) {
    StressVerdict v;
    v.final_set = final_set;
    std::vector<TimedOp> ops;
    try {
        ops = history_ops(history);
    } catch (const std::invalid_argument& e) {
        v.ok = false;
        v.failures.push_back(e.what());
        return v;
    }
    v.operations = ops.size();
    std::map<std::uint32_t, std::vector<TimedOp>> by_key;
    for (const auto& op : ops)
        by_key[op.key].push_back(op);
    for (std::uint32_t k : final_set)
        by_key[k];

    for (auto& [k, kops] : by_key) {
        std::sort(kops.begin(), kops.end(), [](const auto& a, const auto& b) { return a.invoke < b.invoke; });
        std::set<KeySet> possible{KeySet{}};
        std::size_t i = 0;
        while (i < kops.size()) {
            // Grow the window until every later operation starts after all of it has responded.
            std::size_t j = i;
            std::uint64_t last_response = 0;
            while (j < kops.size() && (j == i || kops[j].invoke < last_response)) {
                last_response = std::max(last_response, kops[j].response);
                ++j;
            }
            std::span<const TimedOp> window(kops.data() + i, j - i);
            ++v.windows;
            std::set<KeySet> next;
            bool brute = false;
            for (const KeySet& start : possible) {
                for (auto& out : linearization_outcomes(window, start))
                    next.insert(out);
                if (window.size() <= 8 && brute_force_linearizable(window, start))
                    brute = true;
            }
            if (window.size() <= 8) {
                ++v.brute_force_windows;
                if (brute != !next.empty()) {
                    v.ok = false;
                    v.failures.push_back("key " + std::to_string(k) + ": oracles disagree on window at seq " +
                                         std::to_string(window.front().invoke));
                }
            }
            if (next.empty()) {
                v.ok = false;
                v.failures.push_back("key " + std::to_string(k) + ": window of " +
                                     std::to_string(window.size()) + " ops at seq " +
                                     std::to_string(window.front().invoke) + " is not linearizable");
                break;
            }
            possible = std::move(next);
            i = j;
        }
        KeySet expect = final_set.count(k) ? KeySet{k} : KeySet{};
        if (v.ok && !possible.count(expect)) {
            v.ok = false;
            v.failures.push_back("key " + std::to_string(k) + ": final set disagrees with every linearization");
        }
    }
    return v;
}

namespace {

struct OpGen {
    std::mt19937_64 rng;
    std::uint32_t keys;

    OpGen(std::uint64_t seed, int tid, std::uint32_t k) : keys(k) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(tid)};
        rng.seed(seq);
    }

    std::pair<OperationKind, std::uint32_t> next() {
        static constexpr OperationKind kinds[] = {OperationKind::Contains, OperationKind::Insert,
                                                  OperationKind::Delete};
        auto kind = kinds[std::uniform_int_distribution<int>(0, 2)(rng)];
        auto key = std::uniform_int_distribution<std::uint32_t>(1, keys)(rng);
        return {kind, key};
    }
};

bool run_op(ConcurrentSet& set, OperationKind kind, std::uint32_t key) {
    switch (kind) {
    case OperationKind::Contains: return set.contains(key);
    case OperationKind::Insert: return set.insert(key);
    case OperationKind::Delete: return set.erase(key);
    default: throw std::logic_error("not a set operation");
    }
}

void note_snapshot(const ConcurrentSet& set, StressVerdict& v) {
    auto snap = set.snapshot();
    ++v.snapshots;
    if (!snap.ok) {
        v.ok = false;
        v.failures.push_back("snapshot: " + snap.problem);
    }
}

}  // namespace

namespace {

struct FirstFault {
    std::mutex m;
    std::exception_ptr first;

    void note(std::exception_ptr e) {
        std::lock_guard g(m);
        if (!first)
            first = std::move(e);
    }
    [[noreturn]] void raise(std::vector<HistoryEvent> partial) {
        std::string what = "unknown exception";
        try {
            std::rethrow_exception(first);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        throw StressFault(what, std::move(partial));
    }
};

}  // namespace

StressResult stress(const StressConfig& config) {
    if (config.threads < 1 || config.keys < 1)
        throw std::invalid_argument("stress needs at least one thread and one key");
    ConcurrentSet set;
    HistoryLog log(config.threads);
    std::vector<OpGen> gens;
    for (int t = 0; t < config.threads; ++t)
        gens.emplace_back(config.seed, t, config.keys);
    std::size_t maintenance_ops = 0;
    StressVerdict snapshots;
    FirstFault fault;

    if (config.deterministic) {
        std::mt19937_64 sched(config.seed);
        std::vector<std::size_t> left(static_cast<std::size_t>(config.threads), config.ops_per_thread);
        for (;;) {
            std::vector<int> ready;
            for (int t = 0; t < config.threads; ++t)
                if (left[static_cast<std::size_t>(t)] > 0)
                    ready.push_back(t);
            if (ready.empty())
                break;
            std::size_t choices = ready.size() + (config.maintenance ? 1 : 0);
            std::size_t c = std::uniform_int_distribution<std::size_t>(0, choices - 1)(sched);
            if (c == ready.size()) {
                maintenance_ops += set.maintenance_pass();
                note_snapshot(set, snapshots);
                continue;
            }
            int t = ready[c];
            auto [kind, key] = gens[static_cast<std::size_t>(t)].next();
            log.invoke(t, kind, key);
            log.respond(t, kind, key, run_op(set, kind, key));
            --left[static_cast<std::size_t>(t)];
        }
    } else {
        if (config.yield_probability > 0)
            set.set_pause_hook([p = config.yield_probability] {
                thread_local std::minstd_rand rng(std::hash<std::thread::id>{}(std::this_thread::get_id()));
                if (std::uniform_real_distribution<double>(0, 1)(rng) < p)
                    std::this_thread::yield();
            });
        // Phases end at a join so the tree can be inspected at quiescence.
        constexpr std::size_t kPhases = 4;
        for (std::size_t phase = 0; phase < kPhases; ++phase) {
            std::size_t begin = config.ops_per_thread * phase / kPhases;
            std::size_t end = config.ops_per_thread * (phase + 1) / kPhases;
            std::atomic<int> running{config.threads};
            std::vector<std::thread> workers;
            for (int t = 0; t < config.threads; ++t) {
                workers.emplace_back([&, t] {
                    try {
                        for (std::size_t i = begin; i < end; ++i) {
                            auto [kind, key] = gens[static_cast<std::size_t>(t)].next();
                            log.invoke(t, kind, key);
                            log.respond(t, kind, key, run_op(set, kind, key));
                        }
                    } catch (...) {
                        fault.note(std::current_exception());
                    }
                    --running;
                });
            }
            std::thread maintainer;
            if (config.maintenance)
                maintainer = std::thread([&] {
                    try {
                        while (running.load() > 0) {
                            maintenance_ops += set.maintenance_pass();
                            std::this_thread::yield();
                        }
                    } catch (...) {
                        fault.note(std::current_exception());
                    }
                });
            for (auto& w : workers)
                w.join();
            if (maintainer.joinable())
                maintainer.join();
            if (fault.first)
                fault.raise(log.events());
            note_snapshot(set, snapshots);
        }
    }
    if (config.maintenance) {
        for (int pass = 0; pass < 64; ++pass) {
            std::size_t n = set.maintenance_pass();
            if (n == 0)
                break;
            maintenance_ops += n;
        }
        note_snapshot(set, snapshots);
    }

    StressResult result;
    result.history = log.events();
    auto final_snapshot = set.snapshot();
    result.verdict = check_history(result.history, final_snapshot.set);
    result.verdict.maintenance_ops = maintenance_ops;
    result.verdict.snapshots = snapshots.snapshots;
    if (!snapshots.ok) {
        result.verdict.ok = false;
        result.verdict.failures.insert(result.verdict.failures.end(), snapshots.failures.begin(),
                                       snapshots.failures.end());
    }
    return result;
}

}  // namespace cfset::runtime
