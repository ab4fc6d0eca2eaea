#include <doctest.h>

#include "cfset/checker.hpp"
#include "cfset/explorer.hpp"
#include "fig7_checks.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace cfset;
using helpers::Builder;
using helpers::find_key;

namespace {

struct Fig7 {
    Script sc = load_script(fig7::script_path("fig7.script"));
    Trace t = replay(sc.num_workers, sc.steps);
    const State& at(const std::string& m, std::size_t offset = 0) const {
        return t.states.at(sc.marks.at(m) + offset);
    }
};

const Fig7& fig7_trace() {
    static const Fig7 f;
    return f;
}

bool has(const std::vector<Violation>& vs, const std::string& name) {
    for (const auto& v : vs)
        if (v.check_name == name)
            return true;
    return false;
}

}  // namespace

TEST_CASE("focused") {
    State s = initial_state(1);
    CHECK_FALSE(is_focused(s, kBot));
    CHECK_FALSE(is_focused(s, kRoot));
    const State& f8 = fig7_trace().at("M_b", 1);
    REQUIRE(f8.sys.ctrl == Instruction::F8);
    CHECK(is_focused(f8, f8.sys.nd0));
}

TEST_CASE("pre-removed") {
    const auto& f = fig7_trace();
    const State& ma = f.at("M_a");
    for (std::uint32_t id = 0; id < ma.alloc_counter(); ++id)
        CHECK_FALSE(is_pre_removed(ma, Address{id}));
    const State& mid = f.at("after-f8");
    REQUIRE(mid.sys.ctrl == Instruction::F9);
    CHECK(is_pre_removed(mid, mid.sys.nd0));
    const State& mc = f.at("M_c");
    CHECK(mc.rem(mid.sys.nd0));
    CHECK_FALSE(is_pre_removed(mc, mid.sys.nd0));
}

TEST_CASE("confluent") {
    CHECK_FALSE(is_confluent(initial_state(1), kBot));
    const State& mb = fig7_trace().at("M_b");
    CHECK(is_confluent(mb, find_key(mb, 13)));
    REQUIRE(mb.sys.ctrl == Instruction::F7);
    REQUIRE(mb.sys.l0 != kBot);
    CHECK(is_confluent(mb, mb.sys.l0));
}

TEST_CASE("tree-like") {
    Builder b(1);
    b.op(1, OperationKind::Insert, 4);
    CHECK(is_tree_like(b.s, find_key(b.s, 4)));
    CHECK(is_tree_like(b.s, kRoot));
    CHECK(is_tree_like(b.s, kBot));
    const State& mb = fig7_trace().at("M_b");
    CHECK_FALSE(is_tree_like(mb, find_key(mb, 14, 0)));
    CHECK(is_tree_like(mb, find_key(mb, 14, 1)));
}

TEST_CASE("potential connectivity") {
    State s = initial_state(1);
    for (std::uint32_t k : {1u, 2u})
        CHECK(potential_connectivity(s, kRoot, KeyValue::fin(k)).kind == PotentialConnectivity::Kind::PT1);

    // A removed node focused on a k-connected node.
    Builder b(1);
    b.op(1, OperationKind::Insert, 5);
    State h = b.s;
    Address five = find_key(h, 5);
    Address t = h.allocate(NodeRecord{KeyValue::fin(3), five, five, false, true});
    auto pc = potential_connectivity(h, t, KeyValue::fin(5));
    CHECK(pc.kind == PotentialConnectivity::Kind::PT3);
    CHECK(pc.chain == std::vector<Address>{t});
    CHECK(pc.anchor == five);
    CHECK(oracle::potential(h, t.id, KeyValue::fin(5), Pt2Variant::Corrected) == pc.kind);

    const State& mid = fig7_trace().at("after-f8");
    Address nd0 = mid.sys.nd0;
    auto p2 = potential_connectivity(mid, nd0, KeyValue::fin(14));
    CHECK(p2.kind == PotentialConnectivity::Kind::PT2);
    CHECK(p2.anchor == mid.sys.r0);
}

TEST_CASE("regularity") {
    CHECK(is_regular(initial_state(2)).regular);
    for (const State& m : fig7_trace().t.states)
        CHECK(is_regular(m).regular);

    // 5 has 7 on its right and 7 has 3 on its left: 3 is confluent, 5 is not tree-like.
    State s = initial_state(1);
    Address c = s.allocate(NodeRecord{KeyValue::fin(3), kBot, kBot});
    Address r = s.allocate(NodeRecord{KeyValue::fin(7), c, kBot});
    Address a = s.allocate(NodeRecord{KeyValue::fin(5), c, r});
    s.node(kRoot).left = a;
    CHECK(is_confluent(s, c));
    auto reg = is_regular(s);
    CHECK_FALSE(reg.regular);
    CHECK(reg.failed_clause == "R2");
    CHECK(has(check_state(s), "reg:R2"));
}

TEST_CASE("state invariants") {
    CHECK(check_state(initial_state(3)).empty());
    Builder b(1);
    b.op(1, OperationKind::Insert, 2);
    State s = b.s;
    s.node(find_key(s, 2)).rem = true;
    CHECK(has(check_state(s), "inv:rem-chld-not-bot"));

    CheckConfig off;
    off.disabled_rules = {"inv:rem-chld-not-bot"};
    CHECK_FALSE(has(check_state(s, off), "inv:rem-chld-not-bot"));
}

TEST_CASE("rule table is complete and anchored") {
    std::set<std::string> names;
    for (const auto& r : rule_table()) {
        CHECK_FALSE(r.anchor.empty());
        CHECK(names.insert(r.name).second);
    }
    for (const char* n : {"sp:pdc-remains-pkc", "sp:dc-chd-leads-to-chd", "set:delta", "reg:R1",
                          "inv:rem-chld-not-bot", "lin:oracle-agreement"})
        CHECK(names.count(n));
    CHECK_THROWS(rule("no:such-rule"));
}

TEST_CASE("step properties along the delete path") {
    Builder b(1);
    b.op(1, OperationKind::Insert, 6);
    b.invoke(1, OperationKind::Delete, 6);
    b.run(1, Branch::D2Delete);
    State pre = b.s;
    StepLabel del = *continuation(pre, 1);
    State post = apply_step(pre, del);
    CHECK(set_delta(pre, post) == SetDelta{SetDelta::Kind::Deleted, 6});
    CHECK(check_step(pre, del, post).empty());

    // The same label with a post-state whose Set did not change.
    State forged = post;
    forged.node(find_key(forged, 6)).del = false;
    CHECK(has(check_step(pre, del, forged), "set:delta"));
}

TEST_CASE("Sys steps of the figure 7 run preserve the set") {
    const auto& f = fig7_trace();
    std::size_t sys = 0;
    for (std::size_t i = 0; i < f.t.size(); ++i)
        if (f.t.labels[i].process == kSys) {
            ++sys;
            CHECK(set_delta(f.t.states[i], f.t.states[i + 1]).kind == SetDelta::Kind::Unchanged);
        }
    CHECK(sys == 20);
}

TEST_CASE("predicates agree with the oracles on random-walk states") {
    ExploreConfig cfg;
    cfg.num_workers = 3;
    cfg.keys = {1, 2, 3, 4};
    cfg.ops_per_worker = 3;
    cfg.sys_budget = 4;
    std::size_t states = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Trace t = random_trace(cfg, seed, 80);
        for (const State& s : t.states) {
            if (s.nodes.size() > 12)
                continue;
            ++states;
            auto bad = oracle::compare(s, {0, 1, 2, 3, 4, 5});
            CHECK_MESSAGE(!bad, *bad);
        }
    }
    CHECK(states > 1000);
}

// x = deleted leaf 4 under 3; v6 unlinks it, v7 points Left(4) at prt0.
TEST_CASE("dc-chd literal statement fails for bot child") {
    Builder b(1);
    b.op(1, OperationKind::Insert, 5);
    b.op(1, OperationKind::Insert, 3);
    b.op(1, OperationKind::Insert, 4);
    b.op(1, OperationKind::Delete, 4);
    Address three = find_key(b.s, 3), four = find_key(b.s, 4);
    b.sys(OperationKind::Remove, three.id, false);
    b.next(kSys);  // v6
    State pre = b.s;
    StepLabel v7 = *continuation(pre, kSys);
    REQUIRE(v7.instr == Instruction::V7);
    State post = apply_step(pre, v7);

    const KeyValue k = KeyValue::fin(7);
    CHECK_FALSE(path_connected(pre, four));
    CHECK(post.left(four) == three);
    CHECK(post.right(four) == kBot);
    // Literal reading: z=bot is 7-connected in N, y=3 is not.
    CHECK(k_connected(post, kBot, k));
    CHECK_FALSE(k_connected(post, three, k));
    CheckConfig cfg;
    cfg.keys = {1, 3, 4, 5, 7};
    CHECK(check_step(pre, v7, post, cfg).empty());
}

// Pre-removed leaf 4 is PT2 through its bot children for k=1; inserting 1 under 2 ends that.
TEST_CASE("pdc-remains-pkc with a bot anchor") {
    Builder b(1);
    b.op(1, OperationKind::Insert, 3);
    b.op(1, OperationKind::Insert, 2);
    b.op(1, OperationKind::Insert, 4);
    b.op(1, OperationKind::Delete, 4);
    Address three = find_key(b.s, 3), four = find_key(b.s, 4);
    b.sys(OperationKind::Remove, three.id, false);
    b.next(kSys);  // v6
    const KeyValue k = KeyValue::fin(1);
    auto before = potential_connectivity(b.s, four, k);
    CHECK(before.kind == PotentialConnectivity::Kind::PT2);
    CHECK(before.anchor == kBot);

    b.invoke(1, OperationKind::Insert, 1);
    b.run(1, Branch::I3InsertLeft);
    State pre = b.s;
    StepLabel ins = *continuation(pre, 1);
    State post = apply_step(pre, ins);
    CHECK(potential_connectivity(post, four, k).kind == PotentialConnectivity::Kind::NotConnected);
    CHECK(is_regular(post).regular);

    auto found = check_step(pre, ins, post);
    CHECK(has(found, "sp:pdc-remains-pkc"));
    CheckConfig off;
    off.disabled_rules = {"sp:pdc-remains-pkc"};
    CHECK(check_step(pre, ins, post, off).empty());
}
