#include <doctest.h>

#include <random>

#include "cfset/explorer.hpp"
#include "cfset/linearize.hpp"
#include "fig7_checks.hpp"
#include "helpers.hpp"

using namespace cfset;
using helpers::Builder;
using helpers::find_key;

namespace {

TimedOp op(OperationKind k, std::uint32_t key, std::uint64_t inv, std::uint64_t resp, bool r) {
    return TimedOp{k, key, inv, resp, r};
}

OperationExecution only(const std::vector<OperationExecution>& execs, ProcessId p,
                               OperationKind kind) {
    // Last one: earlier ones build the tree.
    for (auto it = execs.rbegin(); it != execs.rend(); ++it)
        if (it->process == p && it->kind == kind)
            return *it;
    throw std::runtime_error("no such execution");
}

// Sequential search over every order consistent with real time, no memo.
void outcomes_by_search(const std::vector<TimedOp>& ops, std::vector<bool>& done, KeySet set,
                        std::set<KeySet>& out) {
    bool all = true;
    for (std::size_t i = 0; i < ops.size(); ++i)
        if (!done[i]) {
            all = false;
            bool minimal = true;
            for (std::size_t j = 0; j < ops.size(); ++j)
                if (!done[j] && ops[j].response < ops[i].invoke)
                    minimal = false;
            if (!minimal)
                continue;
            KeySet next = set;
            if (sequential_apply(next, ops[i].kind, ops[i].key) != ops[i].result)
                continue;
            done[i] = true;
            outcomes_by_search(ops, done, next, out);
            done[i] = false;
        }
    if (all)
        out.insert(set);
}

}  // namespace

TEST_CASE("carving operations") {
    Builder b(1);
    b.op(1, OperationKind::Insert, 5);
    auto execs = carve_operations(b.trace());
    REQUIRE(execs.size() == 1);
    CHECK(execs[0].complete());
    CHECK(execs[0].return_val == true);
    CHECK(execs[0].invoke_index == 0);
    CHECK(execs[0].response_index == 3);

    b.invoke(1, OperationKind::Delete, 5);
    execs = carve_operations(b.trace());
    REQUIRE(execs.size() == 2);
    CHECK_FALSE(execs[1].complete());

    Script sc = load_script(fig7::script_path("fig7.script"));
    execs = carve_operations(replay(sc.num_workers, sc.steps));
    CHECK(execs.size() == 11);
    for (const auto& e : execs)
        CHECK(e.complete());
}

TEST_CASE("k-scan of contains on the empty tree") {
    Builder b(1);
    b.op(1, OperationKind::Contains, 5);
    Trace t = b.trace();
    auto execs = carve_operations(t);
    ScanSequence scan = extract_kscan(t, execs[0]);
    REQUIRE(scan.triples.size() == 2);
    CHECK(scan.triples[0].kind == TripleKind::Delaying);
    CHECK(scan.triples[0].x == kRoot);
    CHECK(scan.triples[0].y == kRoot);
    CHECK(scan.triples[1].kind == TripleKind::KSearch);
    CHECK(scan.triples[1].x == kRoot);
    CHECK(scan.triples[1].y == kBot);
    CHECK(validate_kscan(t, scan));
    auto j = scanning_witness(t, scan);
    REQUIRE(j);
    CHECK(*j <= scan.triples.back().index);

    ScanSequence reversed = scan;
    std::swap(reversed.triples[0].index, reversed.triples[1].index);
    CHECK_FALSE(validate_kscan(t, reversed));
    ScanSequence bottom = scan;
    bottom.triples[1].x = kBot;
    CHECK_FALSE(validate_kscan(t, bottom));
}

TEST_CASE("a delete that wakes on a removed node backtracks") {
    Builder b(2);
    b.op(1, OperationKind::Insert, 5);
    b.op(1, OperationKind::Insert, 7);
    Address five = find_key(b.s, 5);
    b.invoke(2, OperationKind::Delete, 5);
    b.run(2, Branch::D1ToD2);
    b.sys(OperationKind::RotateLeft, kRoot.id, true);
    b.run(kSys);
    CHECK(b.s.rem(five));
    b.run(2);
    CHECK(b.s.worker(2).return_val == true);

    Trace t = b.trace();
    const auto del = only(carve_operations(t), 2, OperationKind::Delete);
    ScanSequence scan = extract_kscan(t, del);
    bool backtracked = false;
    for (const auto& tr : scan.triples)
        if (tr.kind == TripleKind::Backtracking) {
            backtracked = true;
            CHECK(tr.x == five);
            CHECK(tr.y == t.states[tr.index].right(five));
        }
    CHECK(backtracked);
    CHECK(validate_kscan(t, scan));
    CHECK(scanning_witness(t, scan).has_value());
    CHECK(check_trace(t, Pt2Variant::Corrected).empty());
}

TEST_CASE("the step into i3 contributes no triple") {
    Builder b(2);
    b.op(1, OperationKind::Insert, 5);
    b.invoke(1, OperationKind::Insert, 3);
    b.run(1, Branch::I1ToI3);
    b.op(2, OperationKind::Insert, 4);
    b.run(1);
    Trace t = b.trace();
    const auto ins = only(carve_operations(t), 1, OperationKind::Insert);
    REQUIRE(ins.key == 3);
    std::size_t own = 0, to_i3 = 0, retries = 0;
    for (std::size_t i = ins.invoke_index; i < *ins.response_index; ++i)
        if (t.labels[i].process == 1) {
            ++own;
            to_i3 += t.labels[i].branch == Branch::I1ToI3;
            retries += t.labels[i].branch == Branch::I3Retry;
        }
    CHECK(to_i3 == 2);
    CHECK(retries == 1);
    ScanSequence scan = extract_kscan(t, ins);
    CHECK(scan.triples.size() == own - to_i3);
    CHECK(validate_kscan(t, scan));
    CHECK(scanning_witness(t, scan).has_value());
    CHECK(check_trace(t, Pt2Variant::Corrected).empty());
}

TEST_CASE("a dormant insert is witnessed before it ends") {
    Script sc = load_script(fig7::script_path("fig7-insert16.script"));
    Trace t = replay(sc.num_workers, sc.steps);
    const auto ins = only(carve_operations(t), 4, OperationKind::Insert);
    ScanSequence scan = extract_kscan(t, ins);
    CHECK(validate_kscan(t, scan));
    auto j = scanning_witness(t, scan);
    REQUIRE(j);
    CHECK(*j < scan.triples.back().index);

    // 16 goes in as the right child of 13.
    const State& end = t.back();
    Address sixteen = find_key(end, 16);
    CHECK(end.right(find_key(end, 13)) == sixteen);
    CHECK(compute_set(end) == KeySet{10, 16, 18, 22});
}

TEST_CASE("linearization points") {
    Builder b(1);
    b.op(1, OperationKind::Contains, 5);
    b.op(1, OperationKind::Insert, 5);
    b.op(1, OperationKind::Delete, 5);
    Trace t = b.trace();
    auto execs = carve_operations(t);
    auto points = assign_linearizations(t);
    REQUIRE(points.size() == 3);
    for (const auto& p : points) {
        const auto& e = execs[p.exec];
        CHECK(p.lin_index >= e.invoke_index);
        CHECK(p.lin_index <= *e.response_index);
        if (e.kind == OperationKind::Contains) {
            CHECK(p.tag == RetTag::Ret1);
            CHECK_FALSE(compute_set(t.states[p.lin_index]).count(5));
        } else {
            CHECK(p.lin_index == *e.response_index);
            CHECK(p.tag == (e.kind == OperationKind::Insert ? RetTag::Ret3a : RetTag::Ret2a));
            auto d = set_delta(t.states[p.lin_index], t.states[p.lin_index + 1]);
            CHECK(d.key == 5);
        }
    }
    CHECK_NOTHROW(check_order_consistency(t, execs, points));
    auto moved = points;
    std::swap(moved[1].lin_index, moved[2].lin_index);
    CHECK_THROWS_AS(check_order_consistency(t, execs, moved), LinearizabilityViolation);
}

TEST_CASE("brute-force oracle") {
    CHECK(brute_force_linearizable(std::vector<TimedOp>{op(OperationKind::Insert, 5, 0, 1, true),
                                                        op(OperationKind::Contains, 5, 2, 3, true)}));
    CHECK_FALSE(brute_force_linearizable(std::vector<TimedOp>{op(OperationKind::Contains, 5, 0, 1, true)}));
    // Overlapping: contains may go first.
    CHECK(brute_force_linearizable(std::vector<TimedOp>{op(OperationKind::Insert, 5, 0, 3, true),
                                                        op(OperationKind::Contains, 5, 1, 2, false)}));
    // Real time forbids it.
    CHECK_FALSE(brute_force_linearizable(std::vector<TimedOp>{op(OperationKind::Insert, 5, 0, 1, true),
                                                              op(OperationKind::Contains, 5, 2, 3, false)}));
    std::vector<TimedOp> nine;
    for (std::uint64_t i = 0; i < 9; ++i)
        nine.push_back(op(OperationKind::Contains, 1, 2 * i, 2 * i + 1, false));
    CHECK_THROWS(brute_force_linearizable(nine));
}

TEST_CASE("exact outcomes agree with exhaustive search") {
    std::mt19937_64 rng(99);
    std::size_t linearizable = 0;
    for (int round = 0; round < 400; ++round) {
        std::vector<TimedOp> ops;
        std::size_t n = 1 + rng() % 6;
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t a = rng() % 12, len = 1 + rng() % 5;
            ops.push_back(op(static_cast<OperationKind>(rng() % 3), 1 + rng() % 2, a, a + len, rng() % 2));
        }
        KeySet initial;
        if (rng() % 2)
            initial.insert(1);
        std::set<KeySet> expect;
        std::vector<bool> done(ops.size(), false);
        outcomes_by_search(ops, done, initial, expect);
        auto got = linearization_outcomes(ops, initial);
        CHECK(std::set<KeySet>(got.begin(), got.end()) == expect);
        CHECK(brute_force_linearizable(ops, initial) == !expect.empty());
        linearizable += !expect.empty();
    }
    CHECK(linearizable > 20);
    CHECK(linearizable < 380);
}

TEST_CASE("report lists every execution") {
    Script sc = load_script(fig7::script_path("fig7.script"));
    Trace t = replay(sc.num_workers, sc.steps);
    std::string rep = linearization_report(t);
    std::size_t lines = 0;
    for (std::size_t pos = 0; (pos = rep.find("\nop ", pos)) != std::string::npos; ++pos)
        ++lines;
    CHECK(lines + (rep.rfind("op ", 0) == 0) == 11);
    CHECK(rep.find("sequential") != std::string::npos);
    CHECK(check_trace(t, Pt2Variant::Corrected).empty());
}
