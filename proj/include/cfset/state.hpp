#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cfset {

// Totally ordered key domain: NegInf < Fin(n) < PosInf.
class KeyValue {
  public:
    enum class Kind : std::uint8_t { NegInf = 0, Fin = 1, PosInf = 2 };

    static constexpr KeyValue neg_inf() { return KeyValue(Kind::NegInf, 0); }
    static constexpr KeyValue pos_inf() { return KeyValue(Kind::PosInf, 0); }
    static constexpr KeyValue fin(std::uint32_t n) { return KeyValue(Kind::Fin, n); }

    constexpr KeyValue() = default;

    constexpr Kind kind() const { return kind_; }
    constexpr bool is_fin() const { return kind_ == Kind::Fin; }
    std::uint32_t value() const;

    constexpr auto operator<=>(const KeyValue&) const = default;

    std::string to_string() const;

  private:
    constexpr KeyValue(Kind kind, std::uint32_t value) : kind_(kind), value_(value) {}

    // Member order matters for the defaulted comparison.
    Kind kind_ = Kind::Fin;
    std::uint32_t value_ = 0;
};

struct Address {
    std::uint32_t id = 0;
    constexpr auto operator<=>(const Address&) const = default;
};

inline constexpr Address kRoot{0};
inline constexpr Address kBot{1};

std::string to_string(Address a);

using ProcessId = int;
inline constexpr ProcessId kSys = 0;
inline constexpr ProcessId kNoOwner = -1;

enum class Instruction : std::uint8_t {
    M0, C1, C2, D1, D2, I1, I2, I3,
    F6, F7, F8, F9, R6, R7, R8, R9, V6, V7, V8, V9
};

const char* to_string(Instruction i);
std::optional<Instruction> parse_instruction(const std::string& text);

struct NodeRecord {
    KeyValue key;
    Address left = kBot;
    Address right = kBot;
    bool del = false;
    bool rem = false;
    bool operator==(const NodeRecord&) const = default;
};

struct WorkerLocals {
    Instruction ctrl = Instruction::M0;
    KeyValue k = KeyValue::fin(0);
    Address nd = kRoot;
    Address nxt = kRoot;
    std::optional<bool> return_val;
    std::uint32_t ops_started = 0;
    bool operator==(const WorkerLocals&) const = default;
};

struct SysLocals {
    Instruction ctrl = Instruction::M0;
    Address prt0 = kRoot;
    bool lft0 = true;
    Address nd0 = kRoot;
    Address r0 = kRoot;
    Address l0 = kRoot;
    Address lr0 = kRoot;
    Address rl0 = kRoot;
    Address chd0 = kRoot;
    std::uint32_t ops_started = 0;
    bool operator==(const SysLocals&) const = default;
};

// An address structure: node table indexed by address id, lock table,
// and the control/local registers of every process.
class State {
  public:
    std::vector<NodeRecord> nodes;
    std::vector<ProcessId> lock_owner;
    std::vector<WorkerLocals> workers;  // workers[p - 1]
    SysLocals sys;

    bool operator==(const State&) const = default;

    std::size_t alloc_counter() const { return nodes.size(); }
    bool contains(Address a) const { return a.id < nodes.size(); }
    int num_workers() const { return static_cast<int>(workers.size()); }

    const NodeRecord& node(Address a) const;
    NodeRecord& node(Address a);
    Address left(Address a) const { return node(a).left; }
    Address right(Address a) const { return node(a).right; }
    KeyValue key(Address a) const { return node(a).key; }
    bool del(Address a) const { return node(a).del; }
    bool rem(Address a) const { return node(a).rem; }

    // LR(x, b): Left(x) when b, Right(x) otherwise.
    Address lr(Address a, bool left_side) const {
        return left_side ? left(a) : right(a);
    }
    void set_lr(Address a, bool left_side, Address target);

    const WorkerLocals& worker(ProcessId p) const;
    WorkerLocals& worker(ProcessId p);
    Instruction ctrl(ProcessId p) const;

    std::optional<ProcessId> locked_by(Address a) const;
    bool locked(Address a, ProcessId p) const { return locked_by(a) == p; }
    bool lockable_by(Address a, ProcessId p) const;

    Address allocate(const NodeRecord& record);
};

using KeySet = std::set<std::uint32_t>;

State initial_state(int num_workers);

bool points_to(const State& s, Address x, Address y);

// The k-search successor of x: none when key(x)=k.
std::optional<Address> k_step(const State& s, Address x, KeyValue k);
bool k_arrow(const State& s, Address x, KeyValue k, Address y);

// The addresses along the k-search path from Root, in order, without repeats.
std::vector<Address> k_path(const State& s, KeyValue k);
bool k_connected(const State& s, Address x, KeyValue k);

// Reachability over points-to edges, indexed by address id.
std::vector<bool> reachable_from(const State& s, Address start);
std::vector<bool> path_connected_set(const State& s);
bool path_connected(const State& s, Address x);

KeySet compute_set(const State& s);

struct SetDelta {
    enum class Kind { Unchanged, Inserted, Deleted, Invalid };
    Kind kind = Kind::Unchanged;
    std::uint32_t key = 0;
    bool operator==(const SetDelta&) const = default;
};

SetDelta set_delta(const State& pre, const State& post);
std::string to_string(const SetDelta& d);

Address resolve_new(const State& s);

// Human-readable dump using raw address ids.
std::string serialize(const State& s);

std::string to_string(const KeySet& set);

}  // namespace cfset
