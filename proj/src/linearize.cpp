#include "cfset/linearize.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "cfset/digest.hpp"

namespace cfset {

namespace {

Violation make_violation(const char* name, std::vector<std::pair<std::string, std::string>> w) {
    const RuleInfo& r = rule(name);
    return Violation{r.name, r.anchor, r.kind, std::move(w), {}, {}};
}

std::string describe(const OperationExecution& e) {
    std::ostringstream out;
    out << "p" << e.process << ' ' << to_string(e.kind) << '(' << e.key << ")@" << e.invoke_index;
    if (e.response_index)
        out << ".." << *e.response_index;
    return out.str();
}

class SetCache {
  public:
    explicit SetCache(const Trace& t) : t_(t), sets_(t.states.size()) {}
    const KeySet& at(std::size_t i) {
        if (!sets_[i])
            sets_[i] = compute_set(t_.states[i]);
        return *sets_[i];
    }

  private:
    const Trace& t_;
    std::vector<std::optional<KeySet>> sets_;
};

std::vector<TimedOp> to_timed(std::span<const OperationExecution> execs) {
    std::vector<TimedOp> ops;
    for (const auto& e : execs) {
        if (!e.complete() || !e.return_val)
            throw std::invalid_argument("brute_force_linearizable needs complete executions");
        ops.push_back(TimedOp{e.kind, e.key, e.invoke_index, *e.response_index, *e.return_val});
    }
    return ops;
}

bool permute(std::span<const TimedOp> ops, std::vector<bool>& used, std::size_t done,
             const KeySet& set) {
    if (done == ops.size())
        return true;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        if (used[i])
            continue;
        bool minimal = true;
        for (std::size_t j = 0; j < ops.size() && minimal; ++j)
            if (!used[j] && j != i && ops[j].response < ops[i].invoke)
                minimal = false;
        if (!minimal)
            continue;
        KeySet next = set;
        if (sequential_apply(next, ops[i].kind, ops[i].key) != ops[i].result)
            continue;
        used[i] = true;
        if (permute(ops, used, done + 1, next))
            return true;
        used[i] = false;
    }
    return false;
}

struct AssignOutcome {
    std::vector<OperationExecution> execs;
    std::vector<Linearization> points;
    std::vector<Violation> violations;
};

AssignOutcome assign_impl(const Trace& trace, Pt2Variant variant, TraceCheckStats* stats) {
    AssignOutcome out;
    out.execs = carve_operations(trace);
    SetCache sets(trace);
    for (std::size_t e = 0; e < out.execs.size(); ++e) {
        const auto& ex = out.execs[e];
        if (!ex.complete())
            continue;
        if (stats)
            ++stats->complete_ops;
        const std::size_t r = *ex.response_index;
        const std::uint32_t k = ex.key;
        std::vector<std::pair<std::string, std::string>> base{{"op", describe(ex)}};

        bool preserving = true;
        for (std::size_t i = ex.invoke_index; i <= r; ++i) {
            if (trace.labels[i].process != ex.process)
                continue;
            if (i == r && is_mutating(ex.return_branch))
                continue;
            if (sets.at(i) != sets.at(i + 1))
                preserving = false;
        }

        std::optional<Linearization> point;
        if (is_mutating(ex.return_branch)) {
            const KeySet& before = sets.at(r);
            KeySet expected = before;
            bool ok;
            RetTag tag;
            if (ex.kind == OperationKind::Delete) {
                tag = RetTag::Ret2a;
                ok = before.count(k) && (expected.erase(k), sets.at(r + 1) == expected);
            } else {
                tag = RetTag::Ret3a;
                ok = !before.count(k) && (expected.insert(k), sets.at(r + 1) == expected);
            }
            if (ok && preserving)
                point = Linearization{e, r, tag};
        } else {
            ScanSequence scan;
            try {
                scan = extract_kscan(trace, ex);
            } catch (const KScanError& err) {
                auto w = base;
                w.emplace_back("error", err.what());
                out.violations.push_back(make_violation("lin:kscan", w));
                continue;
            }
            if (auto problem = kscan_problem(trace, scan, variant)) {
                auto w = base;
                w.emplace_back("error", *problem);
                out.violations.push_back(make_violation("lin:kscan", w));
                continue;
            }
            if (stats)
                ++stats->scans_validated;
            Branch b = ex.return_branch;
            if ((b == Branch::C2Return || b == Branch::D2AlreadyDeleted ||
                 b == Branch::I2AlreadyPresent) &&
                r > scan.triples.back().index) {
                Address xn = scan.triples.back().x;
                scan.triples.push_back(ScanTriple{r, xn, xn, TripleKind::Delaying});
            }
            auto j = scanning_witness(trace, scan);
            if (!j) {
                out.violations.push_back(make_violation("lin:scanning-witness", base));
                continue;
            }
            if (stats)
                ++stats->witnesses_found;
            bool present = sets.at(*j).count(k) > 0;
            bool ret = ex.return_val.value_or(false);
            bool ok;
            RetTag tag;
            switch (ex.kind) {
            case OperationKind::Contains: tag = RetTag::Ret1; ok = ret == present; break;
            case OperationKind::Delete: tag = RetTag::Ret2b; ok = !ret && !present; break;
            default: tag = RetTag::Ret3b; ok = !ret && present; break;
            }
            if (ok && preserving && *j >= ex.invoke_index && *j <= r)
                point = Linearization{e, *j, tag};
        }
        if (!point) {
            auto w = base;
            w.emplace_back("return", ex.return_val ? (*ex.return_val ? "true" : "false") : "-");
            w.emplace_back("set-preserving", preserving ? "true" : "false");
            out.violations.push_back(make_violation("lin:ret", w));
            continue;
        }
        out.points.push_back(*point);
    }
    return out;
}

}  // namespace

const char* to_string(TripleKind k) {
    switch (k) {
    case TripleKind::KSearch: return "k-search";
    case TripleKind::Backtracking: return "backtracking";
    case TripleKind::Delaying: return "delaying";
    }
    return "?";
}

const char* to_string(RetTag t) {
    switch (t) {
    case RetTag::Ret1: return "Ret1";
    case RetTag::Ret2a: return "Ret2a";
    case RetTag::Ret2b: return "Ret2b";
    case RetTag::Ret3a: return "Ret3a";
    case RetTag::Ret3b: return "Ret3b";
    }
    return "?";
}

std::vector<OperationExecution> carve_operations(const Trace& trace) {
    std::vector<OperationExecution> out;
    std::vector<std::optional<std::size_t>> open;
    for (std::size_t i = 0; i < trace.labels.size(); ++i) {
        const StepLabel& l = trace.labels[i];
        if (l.process == kSys)
            continue;
        auto p = static_cast<std::size_t>(l.process);
        if (open.size() <= p)
            open.resize(p + 1);
        if (is_invocation(l)) {
            if (open[p])
                throw std::invalid_argument("invocation while an operation is open at step " +
                                            std::to_string(i));
            OperationExecution e;
            e.process = l.process;
            e.kind = invoked_kind(l.branch);
            e.key = l.key;
            e.invoke_index = i;
            open[p] = out.size();
            out.push_back(e);
        } else if (is_return(l)) {
            if (!open[p])
                throw std::invalid_argument("return without invocation at step " +
                                            std::to_string(i));
            auto& e = out[*open[p]];
            e.response_index = i;
            e.return_val = trace.states[i + 1].worker(l.process).return_val;
            e.return_branch = l.branch;
            open[p].reset();
        } else if (!open[p]) {
            throw std::invalid_argument("step outside an operation at " + std::to_string(i));
        }
    }
    return out;
}

ScanSequence extract_kscan(const Trace& trace, const OperationExecution& exec) {
    if (!exec.complete())
        throw std::invalid_argument("extract_kscan needs a complete execution");
    ScanSequence scan;
    scan.k = exec.key;
    const KeyValue k = KeyValue::fin(exec.key);
    const std::size_t r = *exec.response_index;
    for (std::size_t i = exec.invoke_index; i < r; ++i) {
        const StepLabel& l = trace.labels[i];
        if (l.process != exec.process)
            continue;
        const State& n = trace.states[i + 1];
        const auto& w = n.worker(exec.process);
        std::size_t idx = i + 1;
        auto bad = [&](const char* what) {
            return KScanError(std::string(what) + " at step " + std::to_string(i) + " '" +
                              to_string(l) + "'");
        };
        switch (l.branch) {
        case Branch::InvokeContains:
        case Branch::InvokeDelete:
        case Branch::InvokeInsert:
            if (w.nd != kRoot || w.nxt != kRoot)
                throw bad("invocation does not start at root");
            scan.triples.push_back({idx, kRoot, kRoot, TripleKind::Delaying});
            break;
        case Branch::C1Loop:
        case Branch::D1Loop:
        case Branch::I1Loop:
        case Branch::I3Retry:
            if (!k_arrow(n, w.nd, k, w.nxt))
                throw bad("k-search triple without nd ->_k nxt");
            scan.triples.push_back({idx, w.nd, w.nxt, TripleKind::KSearch});
            break;
        case Branch::C1ToC2:
        case Branch::D1ToD2:
        case Branch::I1ToI2:
            if (n.key(w.nd) != k)
                throw bad("delaying triple on a key mismatch");
            scan.triples.push_back({idx, w.nd, w.nd, TripleKind::Delaying});
            break;
        case Branch::D2Backtrack:
        case Branch::I2Backtrack:
            if (n.key(w.nd) != k || !n.rem(w.nd) || w.nxt != n.right(w.nd))
                throw bad("backtracking triple on a non-removed node");
            scan.triples.push_back({idx, w.nd, w.nxt, TripleKind::Backtracking});
            break;
        case Branch::I1ToI3:
            break;
        default:
            throw bad("unexpected step inside the search phase");
        }
    }
    if (scan.triples.empty())
        throw KScanError("operation induced no triple");
    return scan;
}

std::optional<std::string> kscan_problem(const Trace& trace, const ScanSequence& scan,
                                         Pt2Variant variant) {
    if (scan.triples.empty())
        return "empty scan";
    const KeyValue k = KeyValue::fin(scan.k);
    CheckConfig cfg;
    cfg.pt2 = variant;
    for (std::size_t i = 0; i < scan.triples.size(); ++i) {
        const auto& t = scan.triples[i];
        std::string at = "triple " + std::to_string(i) + ": ";
        if (t.index >= trace.states.size())
            return at + "index outside the trace";
        if (i > 0 && t.index <= scan.triples[i - 1].index)
            return at + "indices not strictly increasing";
        const State& m = trace.states[t.index];
        if (!m.contains(t.x) || !m.contains(t.y))
            return at + "unknown address";
        if (t.x == kBot)
            return at + "x is bot";
        Analysis a(m, cfg);
        if (!a.pkc(t.x, k))
            return at + "x not potentially k-connected";
        bool ksearch = k_arrow(m, t.x, k, t.y);
        bool backtrack = m.key(t.x) == k && m.rem(t.x) && t.y == m.right(t.x);
        bool delaying = t.y == t.x;
        if (!(ksearch || backtrack || delaying))
            return at + "neither k-search, backtracking nor delaying";
        if (i + 1 < scan.triples.size()) {
            Address next = scan.triples[i + 1].x;
            bool handshake = t.y != kBot && next == t.y;
            bool stutter = (t.y == kBot || m.key(t.x) == k) && next == t.x;
            if (!handshake && !stutter)
                return at + "next triple neither hands over nor stutters";
        }
    }
    return std::nullopt;
}

bool validate_kscan(const Trace& trace, const ScanSequence& scan, Pt2Variant variant) {
    return !kscan_problem(trace, scan, variant);
}

std::optional<std::size_t> scanning_witness(const Trace& trace, const ScanSequence& scan) {
    if (scan.triples.empty())
        throw std::invalid_argument("scanning_witness on an empty scan");
    const KeyValue k = KeyValue::fin(scan.k);
    const auto& first = scan.triples.front();
    const auto& last = scan.triples.back();
    const State& m0 = trace.states.at(first.index);
    if (first.y == kBot || !k_connected(m0, first.y, k))
        throw std::invalid_argument("scanning_witness: y_0 is not a k-connected address");
    const Address yn = last.y;
    const bool del_n = trace.states.at(last.index).del(yn);
    for (std::size_t j = first.index; j <= last.index; ++j) {
        const State& m = trace.states[j];
        if (m.contains(yn) && k_connected(m, yn, k) && m.del(yn) == del_n)
            return j;
    }
    return std::nullopt;
}

std::vector<Linearization> assign_linearizations(const Trace& trace, Pt2Variant variant) {
    auto out = assign_impl(trace, variant, nullptr);
    if (!out.violations.empty())
        throw LinearizabilityViolation(out.violations.front());
    return out.points;
}

void check_order_consistency(const Trace& trace, const std::vector<OperationExecution>& execs,
                             const std::vector<Linearization>& points) {
    std::vector<Linearization> order = points;
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        if (a.lin_index != b.lin_index)
            return a.lin_index < b.lin_index;
        return !is_mutating(execs[a.exec].return_branch) &&
               is_mutating(execs[b.exec].return_branch);
    });
    SetCache sets(trace);
    KeySet running = sets.at(0);
    for (const auto& p : order) {
        const auto& e = execs[p.exec];
        if (running != sets.at(p.lin_index))
            throw LinearizabilityViolation(make_violation(
                "lin:order", {{"op", describe(e)},
                              {"running", to_string(running)},
                              {"Set", to_string(sets.at(p.lin_index))}}));
        bool result = sequential_apply(running, e.kind, e.key);
        if (!e.return_val || result != *e.return_val)
            throw LinearizabilityViolation(
                make_violation("lin:order", {{"op", describe(e)}, {"sequential", result ? "true" : "false"}}));
    }
}

bool sequential_apply(KeySet& set, OperationKind kind, std::uint32_t key) {
    switch (kind) {
    case OperationKind::Contains: return set.count(key) > 0;
    case OperationKind::Insert: return set.insert(key).second;
    case OperationKind::Delete: return set.erase(key) > 0;
    default: throw std::invalid_argument("not a set operation");
    }
}

std::vector<KeySet> linearization_outcomes(std::span<const TimedOp> ops, const KeySet& initial) {
    using Mask = std::vector<std::uint64_t>;
    const std::size_t n = ops.size();
    auto has = [](const Mask& m, std::size_t i) { return (m[i / 64] >> (i % 64)) & 1; };
    std::set<KeySet> finals;
    std::set<std::pair<Mask, KeySet>> seen;
    std::vector<std::pair<Mask, KeySet>> stack{{Mask((n + 63) / 64, 0), initial}};
    while (!stack.empty()) {
        auto [mask, set] = std::move(stack.back());
        stack.pop_back();
        if (!seen.insert({mask, set}).second)
            continue;
        std::uint64_t min_response = UINT64_MAX;
        for (std::size_t j = 0; j < n; ++j)
            if (!has(mask, j))
                min_response = std::min(min_response, ops[j].response);
        if (min_response == UINT64_MAX) {
            finals.insert(set);
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (has(mask, i) || ops[i].invoke > min_response)
                continue;
            KeySet next = set;
            if (sequential_apply(next, ops[i].kind, ops[i].key) != ops[i].result)
                continue;
            Mask m = mask;
            m[i / 64] |= std::uint64_t{1} << (i % 64);
            stack.push_back({std::move(m), std::move(next)});
        }
    }
    return {finals.begin(), finals.end()};
}

bool brute_force_linearizable(std::span<const TimedOp> ops, const KeySet& initial) {
    if (ops.size() > 8)
        throw std::invalid_argument("brute_force_linearizable is limited to 8 operations");
    std::vector<bool> used(ops.size(), false);
    return permute(ops, used, 0, initial);
}

bool brute_force_linearizable(std::span<const OperationExecution> execs, const KeySet& initial) {
    auto ops = to_timed(execs);
    return brute_force_linearizable(std::span<const TimedOp>(ops), initial);
}

std::vector<Violation> check_trace(const Trace& trace, Pt2Variant variant, TraceCheckStats* stats,
                                   const std::vector<std::uint32_t>& keys) {
    AssignOutcome out = assign_impl(trace, variant, stats);
    std::vector<Violation> violations = out.violations;
    if (violations.empty()) {
        try {
            check_order_consistency(trace, out.execs, out.points);
        } catch (const LinearizabilityViolation& v) {
            violations.push_back(v.violation());
        }
    }
    std::vector<OperationExecution> complete;
    for (const auto& e : out.execs)
        if (e.complete())
            complete.push_back(e);
    if (complete.size() <= 8) {
        if (stats)
            ++stats->oracle_runs;
        bool oracle = brute_force_linearizable(std::span<const OperationExecution>(complete),
                                               compute_set(trace.states.front()));
        bool assigned = out.violations.empty();
        if (oracle != assigned || !oracle)
            violations.push_back(make_violation(
                "lin:oracle-agreement", {{"oracle", oracle ? "true" : "false"},
                                         {"assignment", assigned ? "ok" : "failed"}}));
    }

    // History lemmas over every address and key.
    std::set<KeyValue> universe;
    for (auto k : keys)
        universe.insert(KeyValue::fin(k));
    for (const auto& n : trace.back().nodes)
        if (n.key.is_fin())
            universe.insert(n.key);
    const std::size_t total = trace.back().nodes.size();
    std::vector<std::vector<bool>> ever_kc(universe.size(), std::vector<bool>(total, false));
    std::vector<std::optional<bool>> frozen_del(total);
    std::vector<bool> prev_pc;
    std::vector<std::vector<bool>> prev_kc(universe.size());
    bool kc_reported = false, del_reported = false;
    for (std::size_t j = 0; j < trace.states.size(); ++j) {
        const State& m = trace.states[j];
        auto pc = path_connected_set(m);
        std::size_t ki = 0;
        std::vector<std::vector<bool>> kcs(universe.size());
        for (KeyValue k : universe) {
            std::vector<bool> member(m.nodes.size(), false);
            for (Address a : k_path(m, k))
                member[a.id] = true;
            for (std::uint32_t x = 2; x < m.nodes.size(); ++x) {
                if (ever_kc[ki][x] && pc[x] && !member[x] && !kc_reported) {
                    kc_reported = true;
                    violations.push_back(make_violation(
                        "lin:kc-persists", {{"x", to_string(Address{x})},
                                            {"k", k.to_string()},
                                            {"index", std::to_string(j)}}));
                }
                if (member[x])
                    ever_kc[ki][x] = true;
            }
            kcs[ki] = std::move(member);
            ++ki;
        }
        for (std::uint32_t x = 2; x < m.nodes.size(); ++x) {
            if (frozen_del[x] && *frozen_del[x] != m.del(Address{x}) && !del_reported) {
                del_reported = true;
                violations.push_back(make_violation(
                    "lin:del-frozen", {{"y", to_string(Address{x})}, {"index", std::to_string(j)}}));
            }
            if (j > 0 && x < prev_pc.size() && prev_pc[x] && !pc[x] && !frozen_del[x]) {
                bool was_kc = false;
                for (const auto& member : prev_kc)
                    if (x < member.size() && member[x])
                        was_kc = true;
                if (was_kc) {
                    const State& before = trace.states[j - 1];
                    frozen_del[x] = before.del(Address{x});
                    if (m.del(Address{x}) != *frozen_del[x] && !del_reported) {
                        del_reported = true;
                        violations.push_back(make_violation(
                            "lin:del-frozen",
                            {{"y", to_string(Address{x})}, {"index", std::to_string(j)}}));
                    }
                }
            }
        }
        prev_pc = std::move(pc);
        prev_kc = std::move(kcs);
    }
    return violations;
}

std::string linearization_report(const Trace& trace) {
    auto out = assign_impl(trace, Pt2Variant::Corrected, nullptr);
    std::ostringstream text;
    for (const auto& v : out.violations)
        text << to_string(v) << '\n';
    std::vector<Linearization> order = out.points;
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        if (a.lin_index != b.lin_index)
            return a.lin_index < b.lin_index;
        return !is_mutating(out.execs[a.exec].return_branch) &&
               is_mutating(out.execs[b.exec].return_branch);
    });
    for (const auto& p : out.points) {
        const auto& e = out.execs[p.exec];
        text << "op p" << e.process << ' ' << to_string(e.kind) << ' ' << e.key << " invoke="
             << e.invoke_index << " response=" << *e.response_index << " return="
             << (*e.return_val ? "true" : "false") << " lin=" << p.lin_index << ' '
             << to_string(p.tag) << '\n';
    }
    for (const auto& e : out.execs)
        if (!e.complete())
            text << "pending p" << e.process << ' ' << to_string(e.kind) << ' ' << e.key
                 << " invoke=" << e.invoke_index << '\n';
    text << "sequential";
    for (const auto& p : order) {
        const auto& e = out.execs[p.exec];
        text << ' ' << to_string(e.kind) << '(' << e.key << ")=" << (*e.return_val ? "T" : "F");
    }
    text << '\n';
    return text.str();
}

}  // namespace cfset
