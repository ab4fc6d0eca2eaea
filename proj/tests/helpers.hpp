#pragma once

#include <optional>
#include <string>

#include "cfset/semantics.hpp"
#include "cfset/trace.hpp"

namespace helpers {

using namespace cfset;

// Builds a script step by step while tracking the current state.
struct Builder {
    State s;
    Script sc;

    explicit Builder(int workers) : s(initial_state(workers)) { sc.num_workers = workers; }

    void step(const StepLabel& l) {
        s = apply_step(s, l);
        sc.steps.push_back(l);
    }
    void invoke(ProcessId p, OperationKind kind, std::uint32_t k) {
        StepLabel l;
        l.process = p;
        l.branch = invoke_branch(kind);
        l.key = k;
        step(l);
    }
    // Runs p until it returns or its next step is `until`.
    void run(ProcessId p, std::optional<Branch> until = {}) {
        while (auto c = continuation(s, p)) {
            if (until && c->branch == *until)
                return;
            step(*c);
        }
    }
    void next(ProcessId p) { step(*continuation(s, p)); }
    void op(ProcessId p, OperationKind kind, std::uint32_t k) {
        invoke(p, kind, k);
        run(p);
    }
    void sys(OperationKind kind, std::uint32_t prt0, bool lft0) {
        StepLabel l;
        l.process = kSys;
        l.branch = invoke_branch(kind);
        l.prt0 = Address{prt0};
        l.lft0 = lft0;
        step(l);
    }
    Trace trace() const { return replay(sc.num_workers, sc.steps); }
};

inline Address find_key(const State& s, std::uint32_t k, std::size_t nth = 0) {
    for (std::uint32_t id = 2; id < s.alloc_counter(); ++id)
        if (s.key(Address{id}) == KeyValue::fin(k) && nth-- == 0)
            return Address{id};
    return kBot;
}

}  // namespace helpers
