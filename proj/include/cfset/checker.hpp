#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cfset/semantics.hpp"
#include "cfset/state.hpp"

namespace cfset {

enum class Pt2Variant { Corrected, Original };

const char* to_string(Pt2Variant v);
std::optional<Pt2Variant> parse_pt2_variant(const std::string& text);

struct CheckConfig {
    Pt2Variant pt2 = Pt2Variant::Corrected;
    // Keys quantified over by connectivity checks, in addition to every key
    // stored in the state and every key a worker has searched for.
    std::vector<std::uint32_t> keys;
    std::set<std::string> disabled_rules;
};

enum class ViolationKind { StateInvariant, StepProperty, History };

struct Violation {
    std::string check_name;
    std::string anchor;
    ViolationKind kind = ViolationKind::StateInvariant;
    std::vector<std::pair<std::string, std::string>> witness;
    std::string pre_digest;
    std::string post_digest;
};

// One line: name, anchor, witness bindings, digests.
std::string to_string(const Violation& v);

struct RuleInfo {
    std::string name;
    std::string anchor;
    ViolationKind kind;
};

const std::vector<RuleInfo>& rule_table();
const RuleInfo& rule(const std::string& name);

struct PotentialConnectivity {
    enum class Kind { PT1, PT2, PT3, NotConnected };
    Kind kind = Kind::NotConnected;
    Address anchor = kRoot;
    std::vector<Address> chain;

    bool connected() const { return kind != Kind::NotConnected; }
};

std::string to_string(const PotentialConnectivity& pc);

bool is_focused(const State& s, Address x);
bool is_pre_removed(const State& s, Address x);
bool is_confluent(const State& s, Address x);
bool is_tree_like(const State& s, Address x);
PotentialConnectivity potential_connectivity(const State& s, Address x, KeyValue k,
                                             Pt2Variant variant = Pt2Variant::Corrected);

struct RegularityResult {
    bool regular = true;
    std::string failed_clause;  // "R0", "R1" or "R2"
    std::vector<std::pair<std::string, std::string>> witness;
};

RegularityResult is_regular(const State& s, Pt2Variant variant = Pt2Variant::Corrected);

// Cached derived facts about one state. Not thread-safe.
class Analysis {
  public:
    Analysis(const State& s, const CheckConfig& cfg);

    const State& state() const { return *s_; }
    const CheckConfig& config() const { return *cfg_; }
    const std::vector<KeyValue>& keys() const { return keys_; }

    bool pc(Address x) const { return pc_[x.id]; }
    bool kc(Address x, KeyValue k);
    bool pre_removed(Address x) const;
    bool tree_like(Address x);
    bool confluent(Address x) const;
    PotentialConnectivity potential(Address x, KeyValue k);
    bool pkc(Address x, KeyValue k);
    const RegularityResult& regularity();

  private:
    const std::vector<bool>& kset(KeyValue k);

    const State* s_;
    const CheckConfig* cfg_;
    std::vector<KeyValue> keys_;
    std::vector<bool> pc_;
    std::map<KeyValue, std::vector<bool>> kpaths_;
    std::unordered_map<std::uint64_t, bool> pkc_memo_;
    std::vector<int> tree_like_memo_;
    std::optional<RegularityResult> regularity_;
};

std::vector<Violation> check_state(Analysis& a);
std::vector<Violation> check_step(Analysis& pre, const StepLabel& label, Analysis& post);

std::vector<Violation> check_state(const State& s, const CheckConfig& cfg = {});
std::vector<Violation> check_step(const State& pre, const StepLabel& label, const State& post,
                                  const CheckConfig& cfg = {});

}  // namespace cfset
