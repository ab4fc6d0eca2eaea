#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfset/checker.hpp"
#include "cfset/semantics.hpp"
#include "cfset/state.hpp"
#include "cfset/trace.hpp"

namespace cfset {

struct OperationExecution {
    ProcessId process = 1;
    OperationKind kind = OperationKind::Contains;
    std::uint32_t key = 0;
    std::size_t invoke_index = 0;                 // the invocation step leaves M_i
    std::optional<std::size_t> response_index;    // the return step leaves M_r
    std::optional<bool> return_val;
    Branch return_branch = Branch::SysStep;

    bool complete() const { return response_index.has_value(); }
};

enum class TripleKind { KSearch, Backtracking, Delaying };

const char* to_string(TripleKind k);

struct ScanTriple {
    std::size_t index = 0;
    Address x = kRoot;
    Address y = kRoot;
    TripleKind kind = TripleKind::Delaying;
};

struct ScanSequence {
    std::uint32_t k = 0;
    std::vector<ScanTriple> triples;
};

class KScanError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class RetTag { Ret1, Ret2a, Ret2b, Ret3a, Ret3b };

const char* to_string(RetTag t);

struct Linearization {
    std::size_t exec = 0;        // position in carve_operations output
    std::size_t lin_index = 0;
    RetTag tag = RetTag::Ret1;
};

class LinearizabilityViolation : public std::runtime_error {
  public:
    explicit LinearizabilityViolation(Violation v)
        : std::runtime_error(to_string(v)), violation_(std::move(v)) {}
    const Violation& violation() const { return violation_; }

  private:
    Violation violation_;
};

std::vector<OperationExecution> carve_operations(const Trace& trace);

ScanSequence extract_kscan(const Trace& trace, const OperationExecution& exec);

// First failed clause of the abstract k-scan definition, if any.
std::optional<std::string> kscan_problem(const Trace& trace, const ScanSequence& scan,
                                         Pt2Variant variant = Pt2Variant::Corrected);
bool validate_kscan(const Trace& trace, const ScanSequence& scan,
                    Pt2Variant variant = Pt2Variant::Corrected);

std::optional<std::size_t> scanning_witness(const Trace& trace, const ScanSequence& scan);

// Linearization points of every complete execution; pending ones are skipped.
std::vector<Linearization> assign_linearizations(const Trace& trace,
                                                 Pt2Variant variant = Pt2Variant::Corrected);

// Sorted sequential replay of the assignment against the trace's Sets.
void check_order_consistency(const Trace& trace, const std::vector<OperationExecution>& execs,
                             const std::vector<Linearization>& points);

// A completed operation with its real-time interval.
struct TimedOp {
    OperationKind kind = OperationKind::Contains;
    std::uint32_t key = 0;
    std::uint64_t invoke = 0;
    std::uint64_t response = 0;
    bool result = false;
};

bool sequential_apply(KeySet& set, OperationKind kind, std::uint32_t key);

// Every final set reachable by some linearization of ops from initial.
// Exact search memoised on (done-set, set). Empty result: not linearizable.
std::vector<KeySet> linearization_outcomes(std::span<const TimedOp> ops, const KeySet& initial);

// Factorial oracle over at most 8 operations.
bool brute_force_linearizable(std::span<const OperationExecution> execs,
                              const KeySet& initial = {});
bool brute_force_linearizable(std::span<const TimedOp> ops, const KeySet& initial = {});

struct TraceCheckStats {
    std::size_t complete_ops = 0;
    std::size_t scans_validated = 0;
    std::size_t witnesses_found = 0;
    std::size_t oracle_runs = 0;
};

// Scans, witnesses, Ret clauses, order consistency, oracle agreement and the
// history lemmas over one trace.
std::vector<Violation> check_trace(const Trace& trace, Pt2Variant variant,
                                   TraceCheckStats* stats = nullptr,
                                   const std::vector<std::uint32_t>& keys = {});

// Linearization report: one line per execution plus the induced history.
std::string linearization_report(const Trace& trace);

}  // namespace cfset
