#include "cfset/state.hpp"

#include <algorithm>
#include <array>
#include <sstream>
#include <stdexcept>

namespace cfset {

std::uint32_t KeyValue::value() const {
    if (!is_fin())
        throw std::logic_error("KeyValue::value on a sentinel");
    return value_;
}

std::string KeyValue::to_string() const {
    switch (kind_) {
    case Kind::NegInf: return "-inf";
    case Kind::PosInf: return "+inf";
    case Kind::Fin: break;
    }
    return std::to_string(value_);
}

std::string to_string(Address a) {
    if (a == kRoot)
        return "root";
    if (a == kBot)
        return "bot";
    return "#" + std::to_string(a.id);
}

namespace {

constexpr std::array<const char*, 20> kInstructionNames = {
    "M0", "C1", "C2", "D1", "D2", "I1", "I2", "I3", "F6", "F7",
    "F8", "F9", "R6", "R7", "R8", "R9", "V6", "V7", "V8", "V9"};

}  // namespace

const char* to_string(Instruction i) {
    return kInstructionNames[static_cast<std::size_t>(i)];
}

std::optional<Instruction> parse_instruction(const std::string& text) {
    for (std::size_t i = 0; i < kInstructionNames.size(); ++i)
        if (text == kInstructionNames[i])
            return static_cast<Instruction>(i);
    return std::nullopt;
}

const NodeRecord& State::node(Address a) const {
    if (!contains(a))
        throw std::out_of_range("unknown address " + std::to_string(a.id));
    return nodes[a.id];
}

NodeRecord& State::node(Address a) {
    if (!contains(a))
        throw std::out_of_range("unknown address " + std::to_string(a.id));
    return nodes[a.id];
}

void State::set_lr(Address a, bool left_side, Address target) {
    if (left_side)
        node(a).left = target;
    else
        node(a).right = target;
}

const WorkerLocals& State::worker(ProcessId p) const {
    if (p < 1 || p > num_workers())
        throw std::out_of_range("unknown worker " + std::to_string(p));
    return workers[static_cast<std::size_t>(p - 1)];
}

WorkerLocals& State::worker(ProcessId p) {
    if (p < 1 || p > num_workers())
        throw std::out_of_range("unknown worker " + std::to_string(p));
    return workers[static_cast<std::size_t>(p - 1)];
}

Instruction State::ctrl(ProcessId p) const {
    return p == kSys ? sys.ctrl : worker(p).ctrl;
}

std::optional<ProcessId> State::locked_by(Address a) const {
    if (!contains(a))
        throw std::out_of_range("unknown address " + std::to_string(a.id));
    ProcessId owner = lock_owner[a.id];
    if (owner == kNoOwner)
        return std::nullopt;
    return owner;
}

bool State::lockable_by(Address a, ProcessId p) const {
    auto owner = locked_by(a);
    return !owner || *owner == p;
}

Address State::allocate(const NodeRecord& record) {
    Address a{static_cast<std::uint32_t>(nodes.size())};
    nodes.push_back(record);
    lock_owner.push_back(kNoOwner);
    return a;
}

State initial_state(int num_workers) {
    if (num_workers < 1)
        throw std::invalid_argument("initial_state needs at least one worker");
    State s;
    s.nodes.push_back(NodeRecord{KeyValue::pos_inf(), kBot, kRoot, false, false});
    s.nodes.push_back(NodeRecord{KeyValue::neg_inf(), kBot, kBot, false, false});
    s.lock_owner.assign(2, kNoOwner);
    s.workers.resize(static_cast<std::size_t>(num_workers));
    return s;
}

bool points_to(const State& s, Address x, Address y) {
    s.node(y);
    return s.left(x) == y || s.right(x) == y;
}

std::optional<Address> k_step(const State& s, Address x, KeyValue k) {
    KeyValue kx = s.key(x);
    if (kx == k)
        return std::nullopt;
    return k < kx ? s.left(x) : s.right(x);
}

bool k_arrow(const State& s, Address x, KeyValue k, Address y) {
    auto next = k_step(s, x, k);
    return next && *next == y;
}

std::vector<Address> k_path(const State& s, KeyValue k) {
    std::vector<Address> path;
    std::vector<bool> seen(s.nodes.size(), false);
    Address cur = kRoot;
    for (;;) {
        path.push_back(cur);
        seen[cur.id] = true;
        auto next = k_step(s, cur, k);
        if (!next || seen[next->id])
            break;
        cur = *next;
    }
    return path;
}

bool k_connected(const State& s, Address x, KeyValue k) {
    s.node(x);
    auto path = k_path(s, k);
    return std::find(path.begin(), path.end(), x) != path.end();
}

std::vector<bool> reachable_from(const State& s, Address start) {
    std::vector<bool> seen(s.nodes.size(), false);
    std::vector<Address> stack{start};
    seen[start.id] = true;
    while (!stack.empty()) {
        Address a = stack.back();
        stack.pop_back();
        for (Address b : {s.left(a), s.right(a)}) {
            if (!seen[b.id]) {
                seen[b.id] = true;
                stack.push_back(b);
            }
        }
    }
    return seen;
}

std::vector<bool> path_connected_set(const State& s) {
    return reachable_from(s, kRoot);
}

bool path_connected(const State& s, Address x) {
    s.node(x);
    return path_connected_set(s)[x.id];
}

KeySet compute_set(const State& s) {
    KeySet candidates;
    for (const auto& n : s.nodes)
        if (n.key.is_fin())
            candidates.insert(n.key.value());
    KeySet out;
    for (std::uint32_t k : candidates) {
        Address end = k_path(s, KeyValue::fin(k)).back();
        if (s.key(end) == KeyValue::fin(k) && !s.del(end))
            out.insert(k);
    }
    return out;
}

SetDelta set_delta(const State& pre, const State& post) {
    KeySet a = compute_set(pre);
    KeySet b = compute_set(post);
    std::vector<std::uint32_t> added, dropped;
    std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(added));
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(dropped));
    if (added.empty() && dropped.empty())
        return {};
    if (added.size() == 1 && dropped.empty())
        return {SetDelta::Kind::Inserted, added.front()};
    if (dropped.size() == 1 && added.empty())
        return {SetDelta::Kind::Deleted, dropped.front()};
    return {SetDelta::Kind::Invalid, 0};
}

std::string to_string(const SetDelta& d) {
    switch (d.kind) {
    case SetDelta::Kind::Unchanged: return "Unchanged";
    case SetDelta::Kind::Inserted: return "Inserted(" + std::to_string(d.key) + ")";
    case SetDelta::Kind::Deleted: return "Deleted(" + std::to_string(d.key) + ")";
    case SetDelta::Kind::Invalid: break;
    }
    return "Invalid";
}

Address resolve_new(const State& s) {
    switch (s.sys.ctrl) {
    case Instruction::F7:
    case Instruction::F8:
    case Instruction::F9:
        return s.left(s.sys.r0);
    case Instruction::R7:
    case Instruction::R8:
    case Instruction::R9:
        return s.right(s.sys.l0);
    default:
        return kRoot;
    }
}

std::string to_string(const KeySet& set) {
    std::ostringstream out;
    out << '{';
    bool first = true;
    for (auto k : set) {
        out << (first ? "" : ",") << k;
        first = false;
    }
    out << '}';
    return out.str();
}

std::string serialize(const State& s) {
    std::ostringstream out;
    for (std::uint32_t i = 0; i < s.nodes.size(); ++i) {
        const auto& n = s.nodes[i];
        out << "node " << to_string(Address{i}) << " key=" << n.key.to_string()
            << " left=" << to_string(n.left) << " right=" << to_string(n.right)
            << " del=" << n.del << " rem=" << n.rem;
        if (s.lock_owner[i] != kNoOwner)
            out << " lock=" << s.lock_owner[i];
        out << '\n';
    }
    for (ProcessId p = 1; p <= s.num_workers(); ++p) {
        const auto& w = s.worker(p);
        out << "worker " << p << " ctrl=" << to_string(w.ctrl) << " k=" << w.k.to_string()
            << " nd=" << to_string(w.nd) << " nxt=" << to_string(w.nxt) << " ret="
            << (w.return_val ? (*w.return_val ? "true" : "false") : "-")
            << " ops=" << w.ops_started << '\n';
    }
    const auto& y = s.sys;
    out << "sys ctrl=" << to_string(y.ctrl) << " prt0=" << to_string(y.prt0)
        << " lft0=" << y.lft0 << " nd0=" << to_string(y.nd0) << " r0=" << to_string(y.r0)
        << " l0=" << to_string(y.l0) << " lr0=" << to_string(y.lr0)
        << " rl0=" << to_string(y.rl0) << " chd0=" << to_string(y.chd0)
        << " ops=" << y.ops_started << '\n';
    return out.str();
}

}  // namespace cfset
