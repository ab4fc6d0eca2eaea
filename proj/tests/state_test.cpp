#include <doctest.h>

#include "cfset/digest.hpp"
#include "cfset/state.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cfset;
using helpers::Builder;

TEST_CASE("key order puts sentinels at the ends") {
    CHECK(KeyValue::neg_inf() < KeyValue::fin(0));
    CHECK(KeyValue::fin(0) < KeyValue::fin(1));
    CHECK(KeyValue::fin(4000000000u) < KeyValue::pos_inf());
    CHECK(KeyValue::fin(7) == KeyValue::fin(7));
    CHECK_THROWS(KeyValue::pos_inf().value());
}

TEST_CASE("initial state") {
    State s2 = initial_state(2);
    CHECK(s2.right(kRoot) == kRoot);
    CHECK(s2.left(kRoot) == kBot);
    CHECK(s2.left(kBot) == kBot);
    CHECK(s2.right(kBot) == kBot);
    CHECK(s2.key(kRoot) == KeyValue::pos_inf());
    CHECK(s2.key(kBot) == KeyValue::neg_inf());
    CHECK(compute_set(initial_state(1)).empty());

    State s3 = initial_state(3);
    for (ProcessId p = 0; p <= 3; ++p)
        CHECK(s3.ctrl(p) == Instruction::M0);
    for (std::uint32_t id = 0; id < s3.alloc_counter(); ++id)
        CHECK_FALSE(s3.locked_by(Address{id}).has_value());
    CHECK(s3.worker(2).nd == kRoot);
    CHECK(s3.worker(2).nxt == kRoot);
    CHECK(s3.sys.prt0 == kRoot);
    CHECK(s3.sys.lft0);
}

TEST_CASE("points-to on the initial state") {
    State s = initial_state(1);
    CHECK(points_to(s, kRoot, kRoot));
    CHECK(points_to(s, kRoot, kBot));
    CHECK_FALSE(points_to(s, kBot, kRoot));
    CHECK_THROWS(points_to(s, Address{9}, kRoot));
}

TEST_CASE("k-step") {
    Builder b(1);
    b.op(1, OperationKind::Insert, 5);
    b.op(1, OperationKind::Insert, 3);
    Address five = helpers::find_key(b.s, 5), three = helpers::find_key(b.s, 3);
    CHECK(k_step(b.s, kRoot, KeyValue::fin(5)) == b.s.left(kRoot));
    CHECK_FALSE(k_step(b.s, five, KeyValue::fin(5)).has_value());
    CHECK(k_step(b.s, three, KeyValue::fin(5)) == b.s.right(three));
}

TEST_CASE("path and k connectivity") {
    State s = initial_state(1);
    CHECK(path_connected(s, kBot));
    CHECK(path_connected(s, kRoot));
    for (std::uint32_t k : {0u, 1u, 99u}) {
        CHECK(k_connected(s, kBot, KeyValue::fin(k)));
        CHECK(k_connected(s, kRoot, KeyValue::fin(k)));
    }

    Builder b(1);
    b.invoke(1, OperationKind::Insert, 5);
    b.run(1);
    CHECK(b.sc.steps.size() == 4);
    Address five = helpers::find_key(b.s, 5);
    CHECK(k_connected(b.s, five, KeyValue::fin(5)));
    CHECK(oracle::k_reach(b.s, KeyValue::fin(5))[five.id]);
    CHECK(k_path(b.s, KeyValue::fin(5)) == std::vector<Address>{kRoot, five});
}

TEST_CASE("set of a structure") {
    Builder b(1);
    b.op(1, OperationKind::Insert, 5);
    CHECK(compute_set(b.s) == KeySet{5});
    b.op(1, OperationKind::Insert, 2);
    b.op(1, OperationKind::Delete, 5);
    CHECK(compute_set(b.s) == KeySet{2});
    // Oracle: keys of k-connected, undeleted nodes holding k.
    KeySet expect;
    for (std::uint32_t k = 0; k < 8; ++k) {
        auto kc = oracle::k_reach(b.s, KeyValue::fin(k));
        for (std::uint32_t x = 2; x < b.s.alloc_counter(); ++x)
            if (kc[x] && b.s.nodes[x].key == KeyValue::fin(k) && !b.s.nodes[x].del)
                expect.insert(k);
    }
    CHECK(compute_set(b.s) == expect);
}

TEST_CASE("set delta") {
    Builder b(1);
    CHECK(set_delta(b.s, b.s).kind == SetDelta::Kind::Unchanged);
    b.op(1, OperationKind::Insert, 4);
    b.invoke(1, OperationKind::Delete, 4);
    b.run(1, Branch::D2Delete);
    State before = b.s;
    b.next(1);
    CHECK(set_delta(before, b.s) == SetDelta{SetDelta::Kind::Deleted, 4});

    State two = initial_state(1);
    two.allocate(NodeRecord{KeyValue::fin(1), kBot, kBot});
    two.node(kRoot).left = Address{2};
    State three = two;
    Address c = three.allocate(NodeRecord{KeyValue::fin(2), kBot, kBot});
    three.node(Address{2}).right = c;
    three.node(Address{2}).del = true;
    CHECK(set_delta(two, three).kind == SetDelta::Kind::Invalid);
}

TEST_CASE("resolve new") {
    State s = initial_state(1);
    CHECK(resolve_new(s) == kRoot);
    s.allocate(NodeRecord{KeyValue::fin(1), kBot, kBot});
    s.allocate(NodeRecord{KeyValue::fin(2), Address{2}, Address{4}});
    s.allocate(NodeRecord{KeyValue::fin(3), kBot, kBot});
    s.sys.r0 = Address{3};
    s.sys.l0 = Address{2};
    s.nodes[2].right = Address{4};
    s.sys.ctrl = Instruction::F7;
    CHECK(resolve_new(s) == Address{2});
    s.sys.ctrl = Instruction::R8;
    CHECK(resolve_new(s) == Address{4});
}

TEST_CASE("canonical digests") {
    CHECK(digest_hex(initial_state(2)) == digest_hex(initial_state(2)));

    auto ordered = [](std::uint32_t a, std::uint32_t b) {
        Builder x(1);
        x.op(1, OperationKind::Insert, a);
        x.op(1, OperationKind::Insert, b);
        CHECK(x.sc.steps.size() == 9);
        return x.s;
    };
    CHECK(canonical_form(ordered(1, 2)) != canonical_form(ordered(2, 1)));

    // Same shape, different allocation order.
    auto shape = [](bool low_first) {
        Builder x(2);
        x.op(1, OperationKind::Insert, 2);
        if (low_first) {
            x.op(1, OperationKind::Insert, 1);
            x.op(2, OperationKind::Insert, 3);
        } else {
            x.op(2, OperationKind::Insert, 3);
            x.op(1, OperationKind::Insert, 1);
        }
        return x.s;
    };
    State a = shape(true), b = shape(false);
    CHECK_FALSE(a == b);
    CHECK(canonical_form(a) == canonical_form(b));
    CHECK(canonical_digest(a) == canonical_digest(b));
    CHECK(canonical_text(a) == canonical_text(b));

    State c = b;
    c.node(helpers::find_key(c, 3)).del = true;
    CHECK(canonical_form(c) != canonical_form(b));
}

TEST_CASE("replaying one schedule twice gives the same digests") {
    Builder b(2);
    b.op(1, OperationKind::Insert, 3);
    b.invoke(2, OperationKind::Insert, 1);
    b.op(1, OperationKind::Delete, 3);
    b.run(2);
    Trace t1 = b.trace(), t2 = b.trace();
    REQUIRE(t1.states.size() == t2.states.size());
    for (std::size_t i = 0; i < t1.states.size(); ++i)
        CHECK(digest_hex(t1.states[i]) == digest_hex(t2.states[i]));
}
