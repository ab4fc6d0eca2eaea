#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfset/state.hpp"

namespace cfset {

enum class OperationKind : std::uint8_t {
    Contains, Delete, Insert, RotateLeft, RotateRight, Remove
};

const char* to_string(OperationKind k);

enum class Branch : std::uint8_t {
    InvokeContains, InvokeDelete, InvokeInsert,
    InvokeRotateLeft, InvokeRotateRight, InvokeRemove,
    C1ReturnFalse, C1ToC2, C1Loop,
    C2Return,
    D1ReturnFalse, D1ToD2, D1Loop,
    D2AlreadyDeleted, D2Backtrack, D2Delete,
    I1ToI3, I1ToI2, I1Loop,
    I2AlreadyPresent, I2Backtrack, I2Undelete,
    I3Retry, I3InsertLeft, I3InsertRight,
    SysStep
};

// Name as written in trace files, e.g. "ReturnFalse" for C1ReturnFalse.
const char* branch_name(Branch b);

struct StepLabel {
    ProcessId process = 1;
    Instruction instr = Instruction::M0;
    Branch branch = Branch::SysStep;
    std::uint32_t key = 0;   // worker invocations
    Address prt0 = kRoot;    // Sys invocations
    bool lft0 = true;        // Sys invocations

    bool operator==(const StepLabel&) const = default;
};

std::string to_string(const StepLabel& label);
StepLabel parse_step_label(const std::string& line);

bool is_invocation(const StepLabel& label);
// Steps that end an operation and bring the process back to M0.
bool is_return(const StepLabel& label);
// d2-Delete, i2-Undelete and i3-Insert.
bool is_mutating(Branch b);
OperationKind invoked_kind(Branch b);
Branch invoke_branch(OperationKind k);

struct ModelBounds {
    std::vector<std::uint32_t> keys;
    std::uint32_t ops_per_worker = 1;
    std::uint32_t sys_budget = 0;
};

class StepNotEnabled : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// The unique next step of a process that is inside an operation, or none
// when it is at M0 or blocked on a lock.
std::optional<StepLabel> continuation(const State& s, ProcessId p);

std::vector<StepLabel> enabled_steps(const State& s, const ModelBounds& bounds);

// Reason the label cannot fire in s, or none when it is enabled. Budgets are
// not considered.
std::optional<std::string> disabled_reason(const State& s, const StepLabel& label);

State apply_step(const State& s, const StepLabel& label);

std::optional<State> invoke_sys(const State& s, OperationKind kind, Address prt0, bool lft0);

}  // namespace cfset
