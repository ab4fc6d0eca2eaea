#include "cfset/semantics.hpp"

#include <array>
#include <sstream>

namespace cfset {

namespace {

using I = Instruction;

struct BranchInfo {
    Branch branch;
    const char* name;
};

constexpr std::array<BranchInfo, 26> kBranches = {{
    {Branch::InvokeContains, "InvokeContains"},
    {Branch::InvokeDelete, "InvokeDelete"},
    {Branch::InvokeInsert, "InvokeInsert"},
    {Branch::InvokeRotateLeft, "InvokeRotateLeft"},
    {Branch::InvokeRotateRight, "InvokeRotateRight"},
    {Branch::InvokeRemove, "InvokeRemove"},
    {Branch::C1ReturnFalse, "ReturnFalse"},
    {Branch::C1ToC2, "ToC2"},
    {Branch::C1Loop, "Loop"},
    {Branch::C2Return, "Return"},
    {Branch::D1ReturnFalse, "ReturnFalse"},
    {Branch::D1ToD2, "ToD2"},
    {Branch::D1Loop, "Loop"},
    {Branch::D2AlreadyDeleted, "AlreadyDeleted"},
    {Branch::D2Backtrack, "Backtrack"},
    {Branch::D2Delete, "Delete"},
    {Branch::I1ToI3, "ToI3"},
    {Branch::I1ToI2, "ToI2"},
    {Branch::I1Loop, "Loop"},
    {Branch::I2AlreadyPresent, "AlreadyPresent"},
    {Branch::I2Backtrack, "Backtrack"},
    {Branch::I2Undelete, "Undelete"},
    {Branch::I3Retry, "Retry"},
    {Branch::I3InsertLeft, "InsertLeft"},
    {Branch::I3InsertRight, "InsertRight"},
    {Branch::SysStep, "Exec"},
}};

// Instruction at which a non-invocation branch executes.
std::optional<Instruction> branch_instruction(Branch b) {
    switch (b) {
    case Branch::C1ReturnFalse: case Branch::C1ToC2: case Branch::C1Loop: return I::C1;
    case Branch::C2Return: return I::C2;
    case Branch::D1ReturnFalse: case Branch::D1ToD2: case Branch::D1Loop: return I::D1;
    case Branch::D2AlreadyDeleted: case Branch::D2Backtrack: case Branch::D2Delete: return I::D2;
    case Branch::I1ToI3: case Branch::I1ToI2: case Branch::I1Loop: return I::I1;
    case Branch::I2AlreadyPresent: case Branch::I2Backtrack: case Branch::I2Undelete: return I::I2;
    case Branch::I3Retry: case Branch::I3InsertLeft: case Branch::I3InsertRight: return I::I3;
    default: return std::nullopt;
    }
}

bool is_sys_instruction(Instruction i) {
    return i >= I::F6;
}

// The step a process would take next ignoring locks, plus the lock it needs.
struct Intended {
    StepLabel label;
    std::optional<Address> lock;
};

std::optional<Intended> intended_step(const State& s, ProcessId p) {
    Instruction ctrl = s.ctrl(p);
    if (ctrl == I::M0)
        return std::nullopt;
    StepLabel label;
    label.process = p;
    label.instr = ctrl;
    if (p == kSys) {
        label.branch = Branch::SysStep;
        return Intended{label, std::nullopt};
    }
    const auto& w = s.worker(p);
    std::optional<Address> lock;
    switch (ctrl) {
    case I::C1:
        if (w.nxt == kBot)
            label.branch = Branch::C1ReturnFalse;
        else
            label.branch = s.key(w.nxt) == w.k ? Branch::C1ToC2 : Branch::C1Loop;
        break;
    case I::C2:
        label.branch = Branch::C2Return;
        break;
    case I::D1:
        if (w.nxt == kBot) {
            label.branch = Branch::D1ReturnFalse;
        } else if (s.key(w.nxt) == w.k) {
            label.branch = Branch::D1ToD2;
            lock = w.nxt;
        } else {
            label.branch = Branch::D1Loop;
        }
        break;
    case I::D2:
        if (s.del(w.nd))
            label.branch = Branch::D2AlreadyDeleted;
        else if (s.rem(w.nd))
            label.branch = Branch::D2Backtrack;
        else
            label.branch = Branch::D2Delete;
        break;
    case I::I1:
        if (w.nxt == kBot) {
            label.branch = Branch::I1ToI3;
            lock = w.nd;
        } else if (s.key(w.nxt) == w.k) {
            label.branch = Branch::I1ToI2;
            lock = w.nxt;
        } else {
            label.branch = Branch::I1Loop;
        }
        break;
    case I::I2:
        if (!s.del(w.nd))
            label.branch = Branch::I2AlreadyPresent;
        else if (s.rem(w.nd))
            label.branch = Branch::I2Backtrack;
        else
            label.branch = Branch::I2Undelete;
        break;
    case I::I3: {
        bool left = w.k < s.key(w.nd);
        if (s.lr(w.nd, left) != kBot)
            label.branch = Branch::I3Retry;
        else
            label.branch = left ? Branch::I3InsertLeft : Branch::I3InsertRight;
        break;
    }
    default:
        throw std::logic_error("worker at a Sys instruction");
    }
    return Intended{label, lock};
}

void release_all(State& s, ProcessId p) {
    for (auto& owner : s.lock_owner)
        if (owner == p)
            owner = kNoOwner;
}

void worker_return(State& s, ProcessId p, bool value) {
    release_all(s, p);
    auto& w = s.worker(p);
    w.ctrl = I::M0;
    w.return_val = value;
}

void apply_worker(State& s, const StepLabel& label) {
    ProcessId p = label.process;
    auto& w = s.worker(p);
    switch (label.branch) {
    case Branch::C1ReturnFalse:
    case Branch::D1ReturnFalse:
        worker_return(s, p, false);
        return;
    case Branch::C1ToC2:
        w.nd = w.nxt;
        w.ctrl = I::C2;
        return;
    case Branch::D1ToD2:
        w.nd = w.nxt;
        s.lock_owner[w.nd.id] = p;
        w.ctrl = I::D2;
        return;
    case Branch::I1ToI2:
        w.nd = w.nxt;
        s.lock_owner[w.nd.id] = p;
        w.ctrl = I::I2;
        return;
    case Branch::C1Loop:
    case Branch::D1Loop:
    case Branch::I1Loop:
        w.nd = w.nxt;
        w.nxt = s.lr(w.nd, w.k < s.key(w.nd));
        return;
    case Branch::C2Return:
        worker_return(s, p, !s.del(w.nd));
        return;
    case Branch::D2AlreadyDeleted:
    case Branch::I2AlreadyPresent:
        worker_return(s, p, false);
        return;
    case Branch::D2Backtrack:
    case Branch::I2Backtrack:
        w.nxt = s.right(w.nd);
        w.ctrl = label.branch == Branch::D2Backtrack ? I::D1 : I::I1;
        release_all(s, p);
        return;
    case Branch::D2Delete:
        s.node(w.nd).del = true;
        worker_return(s, p, true);
        return;
    case Branch::I2Undelete:
        s.node(w.nd).del = false;
        worker_return(s, p, true);
        return;
    case Branch::I1ToI3:
        s.lock_owner[w.nd.id] = p;
        w.ctrl = I::I3;
        return;
    case Branch::I3Retry:
        w.nxt = s.lr(w.nd, w.k < s.key(w.nd));
        w.ctrl = I::I1;
        release_all(s, p);
        return;
    case Branch::I3InsertLeft:
    case Branch::I3InsertRight: {
        Address parent = w.nd;
        KeyValue k = w.k;
        Address fresh = s.allocate(NodeRecord{k, kBot, kBot, false, false});
        s.set_lr(parent, label.branch == Branch::I3InsertLeft, fresh);
        worker_return(s, p, true);
        return;
    }
    default:
        throw std::logic_error("not a worker branch");
    }
}

void sys_finish(State& s) {
    s.node(s.sys.nd0).rem = true;
    release_all(s, kSys);
    s.sys.ctrl = I::M0;
}

void apply_sys(State& s) {
    auto& y = s.sys;
    switch (y.ctrl) {
    case I::F6: {
        const auto& nd0 = s.node(y.nd0);
        Address fresh = s.allocate(NodeRecord{nd0.key, y.l0, y.rl0, nd0.del, false});
        s.node(y.r0).left = fresh;
        s.lock_owner[fresh.id] = kSys;
        y.ctrl = I::F7;
        return;
    }
    case I::F7:
        s.node(y.nd0).left = y.r0;
        y.ctrl = I::F8;
        return;
    case I::F8:
        s.set_lr(y.prt0, y.lft0, y.r0);
        y.ctrl = I::F9;
        return;
    case I::F9:
    case I::R9:
    case I::V9:
        sys_finish(s);
        return;
    case I::R6: {
        const auto& nd0 = s.node(y.nd0);
        Address fresh = s.allocate(NodeRecord{nd0.key, y.lr0, y.r0, nd0.del, false});
        s.node(y.l0).right = fresh;
        s.lock_owner[fresh.id] = kSys;
        y.ctrl = I::R7;
        return;
    }
    case I::R7:
        s.node(y.nd0).right = y.l0;
        y.ctrl = I::R8;
        return;
    case I::R8:
        s.set_lr(y.prt0, y.lft0, y.l0);
        y.ctrl = I::R9;
        return;
    case I::V6:
        s.set_lr(y.prt0, y.lft0, y.chd0);
        y.ctrl = I::V7;
        return;
    case I::V7:
        if (s.left(y.nd0) == kBot)
            s.node(y.nd0).left = y.prt0;
        else
            s.node(y.nd0).right = y.prt0;
        y.ctrl = I::V8;
        return;
    case I::V8:
        if (s.left(y.nd0) == y.prt0)
            s.node(y.nd0).right = y.prt0;
        else
            s.node(y.nd0).left = y.prt0;
        y.ctrl = I::V9;
        return;
    default:
        throw std::logic_error("Sys is not inside an operation");
    }
}

std::optional<std::string> sys_prereq_failure(const State& s, OperationKind kind,
                                               Address prt0, bool lft0) {
    if (s.sys.ctrl != I::M0)
        return std::string("Sys is not at M0");
    if (kind != OperationKind::RotateLeft && kind != OperationKind::RotateRight &&
        kind != OperationKind::Remove)
        return std::string("not a Sys operation");
    if (!s.contains(prt0))
        return "pr1: unknown address " + to_string(prt0);
    if (prt0 == kBot || s.rem(prt0))
        return std::string("pr1: prt0 is Bot or removed");
    Address nd0 = s.lr(prt0, lft0);
    if (nd0 == kRoot || nd0 == kBot || nd0 == prt0 || s.rem(nd0))
        return std::string("pr2: nd0 is Root, Bot, prt0 or removed");
    std::vector<Address> locks{prt0, nd0};
    switch (kind) {
    case OperationKind::RotateLeft: {
        Address r0 = s.right(nd0);
        if (r0 == kBot || s.rem(r0))
            return std::string("pr3: Right(nd0) is Bot or removed");
        locks.push_back(r0);
        break;
    }
    case OperationKind::RotateRight: {
        Address l0 = s.left(nd0);
        if (l0 == kBot || s.rem(l0))
            return std::string("pr3: Left(nd0) is Bot or removed");
        locks.push_back(l0);
        break;
    }
    default:
        if (!s.del(nd0) || (s.left(nd0) != kBot && s.right(nd0) != kBot))
            return std::string("pr4: nd0 not deleted or has no Bot child");
        break;
    }
    for (Address a : locks)
        if (!s.lockable_by(a, kSys))
            return "lock on " + to_string(a) + " held by process " +
                   std::to_string(*s.locked_by(a));
    return std::nullopt;
}

}  // namespace

const char* to_string(OperationKind k) {
    switch (k) {
    case OperationKind::Contains: return "contains";
    case OperationKind::Delete: return "delete";
    case OperationKind::Insert: return "insert";
    case OperationKind::RotateLeft: return "rotateLeft";
    case OperationKind::RotateRight: return "rotateRight";
    case OperationKind::Remove: return "remove";
    }
    return "?";
}

const char* branch_name(Branch b) {
    return kBranches[static_cast<std::size_t>(b)].name;
}

bool is_invocation(const StepLabel& label) {
    return label.branch <= Branch::InvokeRemove;
}

bool is_return(const StepLabel& label) {
    switch (label.branch) {
    case Branch::C1ReturnFalse:
    case Branch::C2Return:
    case Branch::D1ReturnFalse:
    case Branch::D2AlreadyDeleted:
    case Branch::D2Delete:
    case Branch::I2AlreadyPresent:
    case Branch::I2Undelete:
    case Branch::I3InsertLeft:
    case Branch::I3InsertRight:
        return true;
    case Branch::SysStep:
        return label.instr == I::F9 || label.instr == I::R9 || label.instr == I::V9;
    default:
        return false;
    }
}

bool is_mutating(Branch b) {
    return b == Branch::D2Delete || b == Branch::I2Undelete || b == Branch::I3InsertLeft ||
           b == Branch::I3InsertRight;
}

OperationKind invoked_kind(Branch b) {
    switch (b) {
    case Branch::InvokeContains: return OperationKind::Contains;
    case Branch::InvokeDelete: return OperationKind::Delete;
    case Branch::InvokeInsert: return OperationKind::Insert;
    case Branch::InvokeRotateLeft: return OperationKind::RotateLeft;
    case Branch::InvokeRotateRight: return OperationKind::RotateRight;
    case Branch::InvokeRemove: return OperationKind::Remove;
    default: throw std::invalid_argument("not an invocation branch");
    }
}

Branch invoke_branch(OperationKind k) {
    return static_cast<Branch>(static_cast<std::uint8_t>(k));
}

std::string to_string(const StepLabel& label) {
    std::ostringstream out;
    out << label.process << ' ' << to_string(label.instr) << ' ' << branch_name(label.branch);
    if (is_invocation(label)) {
        if (label.process == kSys)
            out << ' ' << label.prt0.id << ' ' << (label.lft0 ? "true" : "false");
        else
            out << ' ' << label.key;
    }
    return out.str();
}

StepLabel parse_step_label(const std::string& line) {
    std::istringstream in(line);
    std::string pid_text, instr_text, branch_text;
    if (!(in >> pid_text >> instr_text >> branch_text))
        throw std::invalid_argument("malformed step line: '" + line + "'");
    StepLabel label;
    try {
        label.process = std::stoi(pid_text);
    } catch (const std::exception&) {
        throw std::invalid_argument("bad process id in: '" + line + "'");
    }
    auto instr = parse_instruction(instr_text);
    if (!instr)
        throw std::invalid_argument("unknown instruction in: '" + line + "'");
    label.instr = *instr;
    bool found = false;
    for (const auto& info : kBranches) {
        if (branch_text != info.name)
            continue;
        Branch b = info.branch;
        bool matches = false;
        if (b <= Branch::InvokeRemove)
            matches = *instr == I::M0 &&
                      (label.process == kSys) == (b >= Branch::InvokeRotateLeft);
        else if (b == Branch::SysStep)
            matches = is_sys_instruction(*instr);
        else
            matches = branch_instruction(b) == *instr;
        if (matches) {
            label.branch = b;
            found = true;
            break;
        }
    }
    if (!found)
        throw std::invalid_argument("unknown branch in: '" + line + "'");
    if (is_invocation(label)) {
        if (label.process == kSys) {
            std::uint32_t prt0 = 0;
            std::string lft0;
            if (!(in >> prt0 >> lft0) || (lft0 != "true" && lft0 != "false"))
                throw std::invalid_argument("Sys invocation needs <prt0> <true|false>: '" +
                                            line + "'");
            label.prt0 = Address{prt0};
            label.lft0 = lft0 == "true";
        } else if (!(in >> label.key)) {
            throw std::invalid_argument("worker invocation needs a key: '" + line + "'");
        }
    }
    std::string extra;
    if (in >> extra)
        throw std::invalid_argument("trailing text in: '" + line + "'");
    return label;
}

std::optional<StepLabel> continuation(const State& s, ProcessId p) {
    auto next = intended_step(s, p);
    if (!next)
        return std::nullopt;
    if (next->lock && !s.lockable_by(*next->lock, p))
        return std::nullopt;
    return next->label;
}

std::vector<StepLabel> enabled_steps(const State& s, const ModelBounds& bounds) {
    std::vector<StepLabel> out;
    for (ProcessId p = 1; p <= s.num_workers(); ++p) {
        const auto& w = s.worker(p);
        if (w.ctrl != I::M0) {
            if (auto next = continuation(s, p))
                out.push_back(*next);
            continue;
        }
        if (w.ops_started >= bounds.ops_per_worker)
            continue;
        for (auto kind : {OperationKind::Contains, OperationKind::Delete, OperationKind::Insert})
            for (auto k : bounds.keys) {
                StepLabel label;
                label.process = p;
                label.instr = I::M0;
                label.branch = invoke_branch(kind);
                label.key = k;
                out.push_back(label);
            }
    }
    if (s.sys.ctrl != I::M0) {
        if (auto next = continuation(s, kSys))
            out.push_back(*next);
    } else if (s.sys.ops_started < bounds.sys_budget) {
        for (auto kind :
             {OperationKind::RotateLeft, OperationKind::RotateRight, OperationKind::Remove})
            for (std::uint32_t a = 0; a < s.nodes.size(); ++a)
                for (bool lft0 : {true, false})
                    if (!sys_prereq_failure(s, kind, Address{a}, lft0)) {
                        StepLabel label;
                        label.process = kSys;
                        label.instr = I::M0;
                        label.branch = invoke_branch(kind);
                        label.prt0 = Address{a};
                        label.lft0 = lft0;
                        out.push_back(label);
                    }
    }
    return out;
}

std::optional<std::string> disabled_reason(const State& s, const StepLabel& label) {
    ProcessId p = label.process;
    if (p < 0 || p > s.num_workers())
        return "unknown process " + std::to_string(p);
    if (is_invocation(label)) {
        if (label.instr != I::M0)
            return std::string("invocation label must name M0");
        OperationKind kind = invoked_kind(label.branch);
        if (p == kSys)
            return sys_prereq_failure(s, kind, label.prt0, label.lft0);
        if (kind != OperationKind::Contains && kind != OperationKind::Delete &&
            kind != OperationKind::Insert)
            return std::string("workers invoke only contains, delete or insert");
        if (s.worker(p).ctrl != I::M0)
            return "process " + std::to_string(p) + " is at " + to_string(s.worker(p).ctrl) +
                   ", not M0";
        return std::nullopt;
    }
    auto next = intended_step(s, p);
    if (!next)
        return "process " + std::to_string(p) + " is at M0 and needs an invocation";
    if (next->label.instr != label.instr || next->label.branch != label.branch)
        return "process " + std::to_string(p) + " would take '" + to_string(next->label) +
               "' instead";
    if (next->lock && !s.lockable_by(*next->lock, p))
        return "lock on " + to_string(*next->lock) + " held by process " +
               std::to_string(*s.locked_by(*next->lock));
    return std::nullopt;
}

std::optional<State> invoke_sys(const State& s, OperationKind kind, Address prt0, bool lft0) {
    if (sys_prereq_failure(s, kind, prt0, lft0))
        return std::nullopt;
    State out = s;
    auto& y = out.sys;
    Address nd0 = s.lr(prt0, lft0);
    y = SysLocals{};
    y.ops_started = s.sys.ops_started + 1;
    y.prt0 = prt0;
    y.lft0 = lft0;
    y.nd0 = nd0;
    out.lock_owner[prt0.id] = kSys;
    out.lock_owner[nd0.id] = kSys;
    switch (kind) {
    case OperationKind::RotateLeft:
        y.r0 = s.right(nd0);
        y.rl0 = s.left(y.r0);
        y.l0 = s.left(nd0);
        out.lock_owner[y.r0.id] = kSys;
        y.ctrl = I::F6;
        break;
    case OperationKind::RotateRight:
        y.l0 = s.left(nd0);
        y.lr0 = s.right(y.l0);
        y.r0 = s.right(nd0);
        out.lock_owner[y.l0.id] = kSys;
        y.ctrl = I::R6;
        break;
    default:
        y.chd0 = s.left(nd0) != kBot ? s.left(nd0) : s.right(nd0);
        y.ctrl = I::V6;
        break;
    }
    return out;
}

State apply_step(const State& s, const StepLabel& label) {
    if (auto reason = disabled_reason(s, label))
        throw StepNotEnabled(to_string(label) + ": " + *reason);
    if (is_invocation(label)) {
        OperationKind kind = invoked_kind(label.branch);
        if (label.process == kSys)
            return *invoke_sys(s, kind, label.prt0, label.lft0);
        State out = s;
        auto& w = out.worker(label.process);
        w.k = KeyValue::fin(label.key);
        w.nd = kRoot;
        w.nxt = kRoot;
        w.return_val.reset();
        w.ops_started += 1;
        w.ctrl = kind == OperationKind::Contains ? I::C1
                 : kind == OperationKind::Delete ? I::D1
                                                 : I::I1;
        return out;
    }
    State out = s;
    if (label.process == kSys)
        apply_sys(out);
    else
        apply_worker(out, label);
    return out;
}

}  // namespace cfset
