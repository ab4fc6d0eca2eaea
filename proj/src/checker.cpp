#include "cfset/checker.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "cfset/digest.hpp"

namespace cfset {

namespace {

using I = Instruction;
using W = std::vector<std::pair<std::string, std::string>>;
constexpr auto SI = ViolationKind::StateInvariant;
constexpr auto SP = ViolationKind::StepProperty;
constexpr auto HI = ViolationKind::History;

const std::vector<RuleInfo> kRules = {
    {"wf:sentinel-keys", "Key(root)=+inf, Key(bot)=-inf, every other key finite", SI},
    {"inv:address-points-to-root",
     "x!=Left(x), x!=Right(x) for x not in {root,bot}; root!=Left(root); x->root implies "
     "Rem(x) or (Locked(root,Sys), x=nd0, Ctrl(Sys) in {v8,v9}); Right(root)=root; "
     "Left(bot)=Right(bot)=bot",
     SI},
    {"inv:nd=k", "Ctrl(p)=i1 implies (Key(nd_p)=k_p -> Rem(nd_p))", SI},
    {"inv:rem-chld-not-bot", "Rem(x) -> Left(x)=Right(x)!=bot", SI},
    {"inv:pre-rem", "preRemoved(x) -> x=nd0 and Ctrl(Sys) in {f9,r9,v7,v8,v9}", SI},
    {"lemma:pdc-rem-or-locked",
     "x!=bot not path-connected -> Rem(x) or Locked(x,Sys); outside {f9,r9,v7,v8,v9} every "
     "non-removed x!=bot is path-connected",
     SI},
    {"cor:rem-not-pc", "in a regular state Rem(x) -> not root ->* x", SI},
    {"lem:pc-acyclic",
     "no cycle among path-connected addresses other than the root and bot self-loops; "
     "root ->*_{-inf} bot",
     SI},
    {"locks:ownership",
     "a process at M0 holds no lock; worker p holds exactly {nd_p} at d2,i2,i3 and nothing "
     "elsewhere",
     SI},
    {"ctl:worker:c1-2", "Ctrl(p) in {c1,c2} -> nd_p!=bot", SI},
    {"ctl:worker:c1", "Ctrl(p)=c1 -> Key(nd_p)!=k_p", SI},
    {"ctl:worker:c2", "Ctrl(p)=c2 -> Key(nd_p)=k_p", SI},
    {"ctl:worker:d1-2", "Ctrl(p) in {d1,d2} -> nd_p!=bot", SI},
    {"ctl:worker:d1", "Ctrl(p)=d1 -> (Key(nd_p)=k_p -> Rem(nd_p))", SI},
    {"ctl:worker:d2", "Ctrl(p)=d2 -> Locked(nd_p,p) and Key(nd_p)=k_p", SI},
    {"ctl:worker:i1-3", "Ctrl(p) in {i1,i2,i3} -> nd_p!=bot", SI},
    {"ctl:worker:i1", "Ctrl(p)=i1 -> (Key(nd_p)=k_p -> Rem(nd_p))", SI},
    {"ctl:worker:i2", "Ctrl(p)=i2 -> Locked(nd_p,p) and Key(nd_p)=k_p", SI},
    {"ctl:worker:i3", "Ctrl(p)=i3 -> Locked(nd_p,p), Key(nd_p)!=k_p, nxt_p=bot", SI},
    {"ctl:sys:f6-9",
     "prt0!=bot, not Rem(prt0), nd0!=bot, r0=Right(nd0)!=bot, not Rem(r0), not Rem(nd0), "
     "Key(nd0)!=Key(prt0), nd0!=prt0, prt0/nd0/r0 locked by Sys",
     SI},
    {"ctl:sys:f6-8", "nd0=LR(prt0,lft0)", SI},
    {"ctl:sys:f6", "rl0=Left(r0), l0=Left(nd0)", SI},
    {"ctl:sys:f7-9",
     "Key(new)=Key(nd0), new!=nd0, not Rem(new), Del(new)<->Del(nd0), Left(new)=l0, "
     "Right(new)=rl0, Left(r0)=new",
     SI},
    {"ctl:sys:f7", "Left(nd0)=l0", SI},
    {"ctl:sys:f8-9", "Left(nd0)=r0", SI},
    {"ctl:sys:f9", "r0=LR(prt0,lft0)", SI},
    {"ctl:sys:r6-9",
     "prt0!=bot, not Rem(prt0), nd0!=bot, l0=Left(nd0)!=bot, not Rem(l0), not Rem(nd0), "
     "Key(nd0)!=Key(prt0), nd0!=prt0, prt0/nd0/l0 locked by Sys",
     SI},
    {"ctl:sys:r6-8", "nd0=LR(prt0,lft0)", SI},
    {"ctl:sys:r6", "lr0=Right(l0), r0=Right(nd0)", SI},
    {"ctl:sys:r7-9",
     "Key(new)=Key(nd0), new!=nd0, not Rem(new), Del(new)<->Del(nd0), Left(new)=lr0, "
     "Right(new)=r0, Right(l0)=new",
     SI},
    {"ctl:sys:r7", "Right(nd0)=r0", SI},
    {"ctl:sys:r8-9", "Right(nd0)=l0", SI},
    {"ctl:sys:r9", "l0=LR(prt0,lft0)", SI},
    {"ctl:sys:v6-9",
     "prt0!=bot, not Rem(prt0), nd0!=bot, not Rem(nd0), prt0/nd0 locked by Sys, Del(nd0), "
     "nd0!=prt0",
     SI},
    {"ctl:sys:v6", "nd0=LR(prt0,lft0), nd0->chd0, nd0->bot", SI},
    {"ctl:sys:v6-7", "(Left(nd0)=bot -> Right(nd0)=chd0), (Left(nd0)!=bot -> Left(nd0)=chd0)",
     SI},
    {"ctl:sys:v7-8", "nd0->chd0, prt0->chd0, not prt0->nd0", SI},
    {"ctl:sys:v8-9", "nd0->prt0", SI},
    {"reg:R0",
     "prt0 is Key(nd0)-connected; nd0!=prt0 -> (lft0 -> Key(nd0)<Key(prt0)) and "
     "(not lft0 -> Key(nd0)>Key(prt0))",
     SI},
    {"reg:R1", "nd_p and nxt_p (when !=bot) are potentially k_p-connected", SI},
    {"reg:R2",
     "a path-connected x not in {root,bot} that is not tree-like is nd0 with "
     "Ctrl(Sys) in {f7,f8,r7,r8}",
     SI},
    {"sp:immutable-keys", "Key^M(x)=Key^N(x)", SP},
    {"sp:rem-monotone", "Rem^M(x) -> Rem^N(x); fresh addresses are not removed", SP},
    {"sp:worker-arc-change",
     "a worker step changing a child of x from y to z (distinct) is i3 with y=bot, x=nd_p, "
     "not Rem(x), z fresh with two bot children",
     SP},
    {"sp:disconnect-only-nd0",
     "x!=bot path-connected in M but not in N -> x=nd0 in M and N and the step is f8, r8 or v6",
     SP},
    {"sp:rem-children", "Rem^M(x) -> Left^M(x)=Left^N(x) and Right^M(x)=Right^N(x)", SP},
    {"sp:kc-persists",
     "M regular, a!=bot, root ->*_k a in M, root ->* a in N -> root ->*_k a in N", SP},
    {"sp:dc-stays-dc", "M regular, x not path-connected in M -> not path-connected in N", SP},
    {"sp:pkc-after-disconnect",
     "M regular, x!=bot k-connected in M but not in N -> x potentially k-connected in N; "
     "Key(x)=k -> Left(x) and Right(x) are k-connected in N",
     SP},
    {"sp:pdc-remains-pkc",
     "M regular, x not path-connected and potentially k-connected in M -> potentially "
     "k-connected in N",
     SP},
    {"sp:dc-chd-leads-to-chd",
     "M regular, x not path-connected in M with new child y and unchanged child z!=bot: "
     "root ->*_k z in N -> root ->*_k y in N",
     SP},
    {"sp:rem-not-pc", "M regular, not Rem^M(x), Rem^N(x) -> not root ->* x in M", SP},
    {"set:delta",
     "Set unchanged except d2-Delete: Set(N)=Set(M)\\{k_p}; i2-Undelete, i3-Insert: "
     "Set(N)=Set(M)+{k_p}",
     SP},
    {"frame:single-arc", "a step changes at most one of Left(x), Right(x) over all x", SP},
    {"locks:release", "a returning step leaves its process holding no lock", SP},
    {"lin:kscan", "the steps of a terminating operation induce an abstract k-scan", HI},
    {"lin:scanning-witness",
     "some j in [l_0, l_n] has y_n k-connected in M_j and Del^{M_j}(y_n)<->Del^{M_l_n}(y_n)",
     HI},
    {"lin:ret", "the return clause holds at the chosen linearization index", HI},
    {"lin:order",
     "executions sorted by linearization index replay sequentially with matching return "
     "values and Sets",
     HI},
    {"lin:oracle-agreement", "brute-force linearizability agrees with the assignment", HI},
    {"lin:kc-persists", "root ->*_k x in M_i, root ->* x in M_j (j>i) -> root ->*_k x in M_j",
     HI},
    {"lin:del-frozen",
     "y k-connected in M_l and not path-connected in M_j (j>l) -> Del^{M_l}(y)<->Del^{M_j}(y)",
     HI},
};

std::uint32_t key_code(KeyValue k) {
    switch (k.kind()) {
    case KeyValue::Kind::NegInf: return 0xfffffffeu;
    case KeyValue::Kind::PosInf: return 0xffffffffu;
    case KeyValue::Kind::Fin: break;
    }
    return k.value();
}

std::string addr(Address a) { return to_string(a); }
std::string key_text(KeyValue k) { return k.to_string(); }

bool in(Instruction i, std::initializer_list<Instruction> set) {
    return std::find(set.begin(), set.end(), i) != set.end();
}

bool between(Instruction i, Instruction lo, Instruction hi) { return lo <= i && i <= hi; }

class Reporter {
  public:
    Reporter(const CheckConfig& cfg, std::vector<Violation>& out) : cfg_(cfg), out_(out) {}

    bool on(const char* name) const { return !cfg_.disabled_rules.count(name); }

    void fail(const char* name, W witness) {
        const RuleInfo& r = rule(name);
        out_.push_back(Violation{r.name, r.anchor, r.kind, std::move(witness), {}, {}});
    }

    // Records one failure per rule at most.
    void check(const char* name, bool ok, W witness) {
        if (!ok && !reported_.count(name)) {
            reported_.insert(name);
            fail(name, std::move(witness));
        }
    }

  private:
    const CheckConfig& cfg_;
    std::vector<Violation>& out_;
    std::set<std::string> reported_;
};

bool has_cycle_among(const State& s, const std::vector<bool>& members) {
    // Iterative three-colour DFS ignoring the root and bot self-loops.
    std::vector<int> colour(s.nodes.size(), 0);
    for (std::uint32_t start = 0; start < s.nodes.size(); ++start) {
        if (!members[start] || colour[start])
            continue;
        std::vector<std::pair<Address, int>> stack{{Address{start}, 0}};
        colour[start] = 1;
        while (!stack.empty()) {
            auto& [a, idx] = stack.back();
            if (idx == 2) {
                colour[a.id] = 2;
                stack.pop_back();
                continue;
            }
            Address b = idx == 0 ? s.left(a) : s.right(a);
            ++idx;
            if (b == a && (a == kRoot || a == kBot))
                continue;
            if (!members[b.id])
                continue;
            if (colour[b.id] == 1)
                return true;
            if (colour[b.id] == 0) {
                colour[b.id] = 1;
                stack.push_back({b, 0});
            }
        }
    }
    return false;
}

SetDelta expected_delta(const State& pre, const StepLabel& label) {
    if (label.process == kSys || !is_mutating(label.branch))
        return {};
    std::uint32_t k = pre.worker(label.process).k.value();
    if (label.branch == Branch::D2Delete)
        return {SetDelta::Kind::Deleted, k};
    return {SetDelta::Kind::Inserted, k};
}

}  // namespace

const char* to_string(Pt2Variant v) {
    return v == Pt2Variant::Corrected ? "corrected" : "original";
}

std::optional<Pt2Variant> parse_pt2_variant(const std::string& text) {
    if (text == "corrected")
        return Pt2Variant::Corrected;
    if (text == "original")
        return Pt2Variant::Original;
    return std::nullopt;
}

std::string to_string(const Violation& v) {
    std::ostringstream out;
    out << "violation " << v.check_name << " [" << v.anchor << "]";
    for (const auto& [name, value] : v.witness)
        out << ' ' << name << '=' << value;
    if (!v.pre_digest.empty())
        out << " pre=" << v.pre_digest;
    if (!v.post_digest.empty())
        out << " post=" << v.post_digest;
    return out.str();
}

const std::vector<RuleInfo>& rule_table() { return kRules; }

const RuleInfo& rule(const std::string& name) {
    for (const auto& r : kRules)
        if (r.name == name)
            return r;
    throw std::invalid_argument("unknown rule " + name);
}

std::string to_string(const PotentialConnectivity& pc) {
    switch (pc.kind) {
    case PotentialConnectivity::Kind::PT1: return "PT1";
    case PotentialConnectivity::Kind::PT2: return "PT2(" + to_string(pc.anchor) + ")";
    case PotentialConnectivity::Kind::PT3: {
        std::string out = "PT3([";
        for (std::size_t i = 0; i < pc.chain.size(); ++i)
            out += (i ? "," : "") + to_string(pc.chain[i]);
        return out + "]," + to_string(pc.anchor) + ")";
    }
    case PotentialConnectivity::Kind::NotConnected: break;
    }
    return "NotConnected";
}

Analysis::Analysis(const State& s, const CheckConfig& cfg)
    : s_(&s), cfg_(&cfg), pc_(path_connected_set(s)), tree_like_memo_(s.nodes.size(), -1) {
    std::set<KeyValue> keys;
    for (auto k : cfg.keys)
        keys.insert(KeyValue::fin(k));
    for (const auto& n : s.nodes)
        if (n.key.is_fin())
            keys.insert(n.key);
    for (const auto& w : s.workers)
        if (w.ops_started > 0)
            keys.insert(w.k);
    keys_.assign(keys.begin(), keys.end());
}

const std::vector<bool>& Analysis::kset(KeyValue k) {
    auto it = kpaths_.find(k);
    if (it != kpaths_.end())
        return it->second;
    std::vector<bool> member(s_->nodes.size(), false);
    for (Address a : k_path(*s_, k))
        member[a.id] = true;
    return kpaths_.emplace(k, std::move(member)).first->second;
}

bool Analysis::kc(Address x, KeyValue k) { return kset(k)[x.id]; }

bool Analysis::pre_removed(Address x) const {
    return x != kBot && !s_->rem(x) && !pc_[x.id];
}

bool Analysis::confluent(Address x) const {
    if (x == kBot)
        return false;
    int parents = 0;
    for (std::uint32_t y = 0; y < s_->nodes.size(); ++y)
        if (pc_[y] && points_to(*s_, Address{y}, x))
            ++parents;
    return parents >= 2;
}

bool Analysis::tree_like(Address x) {
    int& memo = tree_like_memo_[x.id];
    if (memo < 0) {
        memo = 1;
        if (x != kRoot && x != kBot) {
            const State& s = *s_;
            auto left_des = reachable_from(s, s.left(x));
            auto right_des = reachable_from(s, s.right(x));
            for (std::uint32_t y = 0; y < s.nodes.size(); ++y) {
                Address a{y};
                if (a == x || a == kBot)
                    continue;
                if (left_des[y] && !(s.key(a) < s.key(x)))
                    memo = 0;
                if (right_des[y] && !(s.key(a) > s.key(x)))
                    memo = 0;
            }
        }
    }
    return memo == 1;
}

PotentialConnectivity Analysis::potential(Address x, KeyValue k) {
    using K = PotentialConnectivity::Kind;
    const State& s = *s_;
    if (kc(x, k))
        return {K::PT1, x, {}};
    auto pt2 = [&](Address t) -> std::optional<Address> {
        if (!pre_removed(t) || !kc(s.sys.prt0, k))
            return std::nullopt;
        if (cfg_->pt2 == Pt2Variant::Corrected) {
            for (Address y : {s.left(t), s.right(t)})
                if (kc(y, k))
                    return y;
            return std::nullopt;
        }
        auto y = k_step(s, t, k);
        if (!y)
            return t;
        if (kc(*y, k))
            return *y;
        return std::nullopt;
    };
    if (auto anchor = pt2(x))
        return {K::PT2, *anchor, {}};
    if (!s.rem(x))
        return {};
    std::vector<int> parent(s.nodes.size(), -2);
    std::vector<Address> stack{x};
    parent[x.id] = -1;
    while (!stack.empty()) {
        Address t = stack.back();
        stack.pop_back();
        bool anchored = true;
        for (Address y : {s.left(t), s.right(t)})
            if (s.rem(y) || !(kc(y, k) || pt2(y)))
                anchored = false;
        if (anchored) {
            std::vector<Address> chain;
            for (int c = static_cast<int>(t.id); c >= 0; c = parent[c])
                chain.push_back(Address{static_cast<std::uint32_t>(c)});
            std::reverse(chain.begin(), chain.end());
            return {K::PT3, s.left(t), chain};
        }
        for (Address y : {s.left(t), s.right(t)})
            if (s.rem(y) && parent[y.id] == -2) {
                parent[y.id] = static_cast<int>(t.id);
                stack.push_back(y);
            }
    }
    return {};
}

bool Analysis::pkc(Address x, KeyValue k) {
    std::uint64_t code = (static_cast<std::uint64_t>(x.id) << 32) | key_code(k);
    auto it = pkc_memo_.find(code);
    if (it != pkc_memo_.end())
        return it->second;
    bool v = potential(x, k).connected();
    pkc_memo_.emplace(code, v);
    return v;
}

const RegularityResult& Analysis::regularity() {
    if (regularity_)
        return *regularity_;
    RegularityResult r;
    const State& s = *s_;
    const auto& y = s.sys;
    auto fail = [&](const char* clause, W w) {
        if (r.regular) {
            r.regular = false;
            r.failed_clause = clause;
            r.witness = std::move(w);
        }
    };
    KeyValue knd = s.key(y.nd0), kprt = s.key(y.prt0);
    bool r0 = kc(y.prt0, knd);
    if (y.nd0 != y.prt0) {
        if (y.lft0 && !(knd < kprt))
            r0 = false;
        if (!y.lft0 && !(knd > kprt))
            r0 = false;
    }
    if (!r0)
        fail("R0", {{"prt0", addr(y.prt0)}, {"nd0", addr(y.nd0)}, {"lft0", y.lft0 ? "true" : "false"}});
    for (ProcessId p = 1; p <= s.num_workers(); ++p) {
        const auto& w = s.worker(p);
        if (!pkc(w.nd, w.k))
            fail("R1", {{"p", std::to_string(p)}, {"nd_p", addr(w.nd)}, {"k_p", key_text(w.k)}});
        if (w.nxt != kBot && !pkc(w.nxt, w.k))
            fail("R1", {{"p", std::to_string(p)}, {"nxt_p", addr(w.nxt)}, {"k_p", key_text(w.k)}});
    }
    for (std::uint32_t i = 2; i < s.nodes.size(); ++i) {
        Address x{i};
        if (pc_[i] && !tree_like(x) &&
            !(x == y.nd0 && in(y.ctrl, {I::F7, I::F8, I::R7, I::R8})))
            fail("R2", {{"x", addr(x)}, {"Ctrl(Sys)", to_string(y.ctrl)}});
    }
    regularity_ = r;
    return *regularity_;
}

bool is_focused(const State& s, Address x) {
    return s.left(x) == s.right(x) && s.left(x) != kBot;
}

bool is_pre_removed(const State& s, Address x) {
    return x != kBot && !s.rem(x) && !path_connected(s, x);
}

bool is_confluent(const State& s, Address x) {
    CheckConfig cfg;
    return Analysis(s, cfg).confluent(x);
}

bool is_tree_like(const State& s, Address x) {
    CheckConfig cfg;
    return Analysis(s, cfg).tree_like(x);
}

PotentialConnectivity potential_connectivity(const State& s, Address x, KeyValue k,
                                             Pt2Variant variant) {
    CheckConfig cfg;
    cfg.pt2 = variant;
    return Analysis(s, cfg).potential(x, k);
}

RegularityResult is_regular(const State& s, Pt2Variant variant) {
    CheckConfig cfg;
    cfg.pt2 = variant;
    return Analysis(s, cfg).regularity();
}

std::vector<Violation> check_state(Analysis& a) {
    std::vector<Violation> out;
    Reporter rep(a.config(), out);
    const State& s = a.state();
    const auto& y = s.sys;
    const std::uint32_t n = static_cast<std::uint32_t>(s.nodes.size());

    if (rep.on("wf:sentinel-keys")) {
        rep.check("wf:sentinel-keys",
                  s.key(kRoot) == KeyValue::pos_inf() && s.key(kBot) == KeyValue::neg_inf(), {});
        for (std::uint32_t i = 2; i < n; ++i)
            rep.check("wf:sentinel-keys", s.nodes[i].key.is_fin(), {{"x", addr(Address{i})}});
    }

    if (rep.on("inv:address-points-to-root")) {
        const char* name = "inv:address-points-to-root";
        rep.check(name, s.right(kRoot) == kRoot && s.left(kBot) == kBot && s.right(kBot) == kBot,
                  {{"clause", "sentinels"}});
        rep.check(name, s.left(kRoot) != kRoot, {{"clause", "root!=Left(root)"}});
        for (std::uint32_t i = 2; i < n; ++i) {
            Address x{i};
            rep.check(name, s.left(x) != x && s.right(x) != x,
                      {{"clause", "self-pointer"}, {"x", addr(x)}});
            if (points_to(s, x, kRoot)) {
                bool ok = s.rem(x) || (s.locked(kRoot, kSys) && x == y.nd0 &&
                                       in(y.ctrl, {I::V8, I::V9}));
                rep.check(name, ok, {{"clause", "points-to-root"}, {"x", addr(x)}});
            }
        }
    }

    if (rep.on("inv:nd=k"))
        for (ProcessId p = 1; p <= s.num_workers(); ++p) {
            const auto& w = s.worker(p);
            if (w.ctrl == I::I1)
                rep.check("inv:nd=k", !(s.key(w.nd) == w.k) || s.rem(w.nd),
                          {{"p", std::to_string(p)}, {"nd_p", addr(w.nd)}});
        }

    if (rep.on("inv:rem-chld-not-bot"))
        for (std::uint32_t i = 0; i < n; ++i) {
            Address x{i};
            if (s.rem(x))
                rep.check("inv:rem-chld-not-bot", is_focused(s, x), {{"x", addr(x)}});
        }

    if (rep.on("inv:pre-rem"))
        for (std::uint32_t i = 0; i < n; ++i) {
            Address x{i};
            if (a.pre_removed(x))
                rep.check("inv:pre-rem",
                          x == y.nd0 && in(y.ctrl, {I::F9, I::R9, I::V7, I::V8, I::V9}),
                          {{"x", addr(x)}, {"Ctrl(Sys)", to_string(y.ctrl)}});
        }

    if (rep.on("lemma:pdc-rem-or-locked")) {
        bool transient = in(y.ctrl, {I::F9, I::R9, I::V7, I::V8, I::V9});
        for (std::uint32_t i = 0; i < n; ++i) {
            Address x{i};
            if (x == kBot || a.pc(x))
                continue;
            rep.check("lemma:pdc-rem-or-locked", s.rem(x) || s.locked(x, kSys),
                      {{"x", addr(x)}});
            rep.check("lemma:pdc-rem-or-locked", transient || s.rem(x),
                      {{"x", addr(x)}, {"Ctrl(Sys)", to_string(y.ctrl)}});
        }
    }

    if (rep.on("lem:pc-acyclic")) {
        std::vector<bool> members(n);
        for (std::uint32_t i = 0; i < n; ++i)
            members[i] = a.pc(Address{i});
        rep.check("lem:pc-acyclic", a.pc(kBot), {{"clause", "bot path-connected"}});
        rep.check("lem:pc-acyclic", !has_cycle_among(s, members), {{"clause", "cycle"}});
        rep.check("lem:pc-acyclic", k_path(s, KeyValue::neg_inf()).back() == kBot,
                  {{"clause", "root ->*_{-inf} bot"}});
    }

    if (rep.on("locks:ownership")) {
        for (std::uint32_t i = 0; i < n; ++i) {
            ProcessId owner = s.lock_owner[i];
            if (owner == kNoOwner)
                continue;
            if (owner == kSys) {
                rep.check("locks:ownership", y.ctrl != I::M0, {{"x", addr(Address{i})}, {"owner", "Sys"}});
                continue;
            }
            const auto& w = s.worker(owner);
            rep.check("locks:ownership",
                      in(w.ctrl, {I::D2, I::I2, I::I3}) && w.nd == Address{i},
                      {{"x", addr(Address{i})}, {"owner", std::to_string(owner)}});
        }
        for (ProcessId p = 1; p <= s.num_workers(); ++p) {
            const auto& w = s.worker(p);
            if (in(w.ctrl, {I::D2, I::I2, I::I3}))
                rep.check("locks:ownership", s.locked(w.nd, p),
                          {{"p", std::to_string(p)}, {"nd_p", addr(w.nd)}});
        }
    }

    for (ProcessId p = 1; p <= s.num_workers(); ++p) {
        const auto& w = s.worker(p);
        W wit{{"p", std::to_string(p)}, {"nd_p", addr(w.nd)}, {"k_p", key_text(w.k)}};
        auto check = [&](const char* name, bool ok) {
            if (rep.on(name))
                rep.check(name, ok, wit);
        };
        if (in(w.ctrl, {I::C1, I::C2, I::D1, I::D2, I::I1, I::I2, I::I3}) && w.nd == kBot) {
            const char* name = in(w.ctrl, {I::C1, I::C2})   ? "ctl:worker:c1-2"
                               : in(w.ctrl, {I::D1, I::D2}) ? "ctl:worker:d1-2"
                                                            : "ctl:worker:i1-3";
            check(name, false);
            continue;
        }
        bool key_match = s.key(w.nd) == w.k;
        switch (w.ctrl) {
        case I::C1: check("ctl:worker:c1", !key_match); break;
        case I::C2: check("ctl:worker:c2", key_match); break;
        case I::D1: check("ctl:worker:d1", !key_match || s.rem(w.nd)); break;
        case I::D2: check("ctl:worker:d2", s.locked(w.nd, p) && key_match); break;
        case I::I1: check("ctl:worker:i1", !key_match || s.rem(w.nd)); break;
        case I::I2: check("ctl:worker:i2", s.locked(w.nd, p) && key_match); break;
        case I::I3:
            check("ctl:worker:i3", s.locked(w.nd, p) && !key_match && w.nxt == kBot);
            break;
        default: break;
        }
    }

    if (y.ctrl != I::M0) {
        W wit{{"Ctrl(Sys)", to_string(y.ctrl)}, {"prt0", addr(y.prt0)}, {"nd0", addr(y.nd0)}};
        auto check = [&](const char* name, bool ok) {
            if (rep.on(name))
                rep.check(name, ok, wit);
        };
        auto locked = [&](Address x) { return s.locked(x, kSys); };
        bool base = y.prt0 != kBot && !s.rem(y.prt0) && y.nd0 != kBot && !s.rem(y.nd0) &&
                    y.nd0 != y.prt0 && locked(y.prt0) && locked(y.nd0);
        bool nd0_in_place = s.lr(y.prt0, y.lft0) == y.nd0;
        Address fresh = resolve_new(s);
        auto clone_ok = [&](Address left, Address right) {
            return s.key(fresh) == s.key(y.nd0) && fresh != y.nd0 && !s.rem(fresh) &&
                   s.del(fresh) == s.del(y.nd0) && s.left(fresh) == left &&
                   s.right(fresh) == right;
        };
        if (between(y.ctrl, I::F6, I::F9)) {
            check("ctl:sys:f6-9", base && y.r0 == s.right(y.nd0) && y.r0 != kBot &&
                                      !s.rem(y.r0) && s.key(y.nd0) != s.key(y.prt0) &&
                                      locked(y.r0));
            if (y.ctrl != I::F9)
                check("ctl:sys:f6-8", nd0_in_place);
            if (y.ctrl == I::F6)
                check("ctl:sys:f6", y.rl0 == s.left(y.r0) && y.l0 == s.left(y.nd0));
            else
                check("ctl:sys:f7-9", clone_ok(y.l0, y.rl0) && s.left(y.r0) == fresh);
            if (y.ctrl == I::F7)
                check("ctl:sys:f7", s.left(y.nd0) == y.l0);
            if (y.ctrl == I::F8 || y.ctrl == I::F9)
                check("ctl:sys:f8-9", s.left(y.nd0) == y.r0);
            if (y.ctrl == I::F9)
                check("ctl:sys:f9", s.lr(y.prt0, y.lft0) == y.r0);
        } else if (between(y.ctrl, I::R6, I::R9)) {
            check("ctl:sys:r6-9", base && y.l0 == s.left(y.nd0) && y.l0 != kBot &&
                                      !s.rem(y.l0) && s.key(y.nd0) != s.key(y.prt0) &&
                                      locked(y.l0));
            if (y.ctrl != I::R9)
                check("ctl:sys:r6-8", nd0_in_place);
            if (y.ctrl == I::R6)
                check("ctl:sys:r6", y.lr0 == s.right(y.l0) && y.r0 == s.right(y.nd0));
            else
                check("ctl:sys:r7-9", clone_ok(y.lr0, y.r0) && s.right(y.l0) == fresh);
            if (y.ctrl == I::R7)
                check("ctl:sys:r7", s.right(y.nd0) == y.r0);
            if (y.ctrl == I::R8 || y.ctrl == I::R9)
                check("ctl:sys:r8-9", s.right(y.nd0) == y.l0);
            if (y.ctrl == I::R9)
                check("ctl:sys:r9", s.lr(y.prt0, y.lft0) == y.l0);
        } else {
            check("ctl:sys:v6-9", base && s.del(y.nd0));
            if (y.ctrl == I::V6)
                check("ctl:sys:v6", nd0_in_place && points_to(s, y.nd0, y.chd0) &&
                                        points_to(s, y.nd0, kBot));
            if (y.ctrl == I::V6 || y.ctrl == I::V7) {
                bool ok = s.left(y.nd0) == kBot ? s.right(y.nd0) == y.chd0
                                                : s.left(y.nd0) == y.chd0;
                check("ctl:sys:v6-7", ok);
            }
            if (y.ctrl == I::V7 || y.ctrl == I::V8)
                check("ctl:sys:v7-8", points_to(s, y.nd0, y.chd0) &&
                                          points_to(s, y.prt0, y.chd0) &&
                                          !points_to(s, y.prt0, y.nd0));
            if (y.ctrl == I::V8 || y.ctrl == I::V9)
                check("ctl:sys:v8-9", points_to(s, y.nd0, y.prt0));
        }
    }

    const RegularityResult& reg = a.regularity();
    if (!reg.regular) {
        std::string name = "reg:" + reg.failed_clause;
        if (rep.on(name.c_str()))
            rep.check(name.c_str(), false, reg.witness);
    } else if (rep.on("cor:rem-not-pc")) {
        for (std::uint32_t i = 0; i < n; ++i) {
            Address x{i};
            if (s.rem(x))
                rep.check("cor:rem-not-pc", !a.pc(x), {{"x", addr(x)}});
        }
    }
    return out;
}

std::vector<Violation> check_step(Analysis& pre, const StepLabel& label, Analysis& post) {
    std::vector<Violation> out;
    Reporter rep(pre.config(), out);
    const State& m = pre.state();
    const State& nn = post.state();
    const std::uint32_t old_n = static_cast<std::uint32_t>(m.nodes.size());
    const std::uint32_t new_n = static_cast<std::uint32_t>(nn.nodes.size());
    const std::string step = to_string(label);

    if (rep.on("sp:immutable-keys"))
        for (std::uint32_t i = 0; i < old_n; ++i)
            rep.check("sp:immutable-keys", m.nodes[i].key == nn.nodes[i].key,
                      {{"x", addr(Address{i})}, {"step", step}});

    if (rep.on("sp:rem-monotone")) {
        for (std::uint32_t i = 0; i < old_n; ++i)
            rep.check("sp:rem-monotone", !m.nodes[i].rem || nn.nodes[i].rem,
                      {{"x", addr(Address{i})}, {"step", step}});
        for (std::uint32_t i = old_n; i < new_n; ++i)
            rep.check("sp:rem-monotone", !nn.nodes[i].rem,
                      {{"x", addr(Address{i})}, {"step", step}});
    }

    int changed_arcs = 0;
    for (std::uint32_t i = 0; i < old_n; ++i) {
        Address x{i};
        for (bool left : {true, false}) {
            Address before = m.lr(x, left), after = nn.lr(x, left);
            if (before == after)
                continue;
            ++changed_arcs;
            if (label.process != kSys && rep.on("sp:worker-arc-change") && x != before &&
                x != after) {
                const auto& w = m.worker(label.process);
                bool ok = (label.branch == Branch::I3InsertLeft ||
                           label.branch == Branch::I3InsertRight) &&
                          before == kBot && x == w.nd && !m.rem(x) && after.id >= old_n &&
                          nn.left(after) == kBot && nn.right(after) == kBot;
                rep.check("sp:worker-arc-change", ok,
                          {{"x", addr(x)}, {"y", addr(before)}, {"z", addr(after)}, {"step", step}});
            }
            if (rep.on("sp:rem-children") && m.rem(x))
                rep.check("sp:rem-children", false, {{"x", addr(x)}, {"step", step}});
        }
    }
    if (rep.on("frame:single-arc"))
        rep.check("frame:single-arc", changed_arcs <= 1,
                  {{"changed", std::to_string(changed_arcs)}, {"step", step}});

    if (rep.on("sp:disconnect-only-nd0"))
        for (std::uint32_t i = 0; i < old_n; ++i) {
            Address x{i};
            if (x == kBot || !pre.pc(x) || post.pc(x))
                continue;
            bool ok = label.process == kSys && in(label.instr, {I::F8, I::R8, I::V6}) &&
                      x == m.sys.nd0 && x == nn.sys.nd0;
            rep.check("sp:disconnect-only-nd0", ok, {{"x", addr(x)}, {"step", step}});
        }

    if (rep.on("set:delta")) {
        SetDelta expected = expected_delta(m, label);
        SetDelta actual = set_delta(m, nn);
        rep.check("set:delta", expected == actual,
                  {{"expected", to_string(expected)}, {"actual", to_string(actual)}, {"step", step}});
    }

    if (rep.on("locks:release") && is_return(label))
        rep.check("locks:release",
                  std::none_of(nn.lock_owner.begin(), nn.lock_owner.end(),
                               [&](ProcessId o) { return o == label.process; }),
                  {{"step", step}});

    if (!pre.regularity().regular)
        return out;

    const auto& keys = pre.keys();
    for (std::uint32_t i = 0; i < old_n; ++i) {
        Address x{i};
        bool pc_m = pre.pc(x), pc_n = post.pc(x);

        if (!pc_m && rep.on("sp:dc-stays-dc"))
            rep.check("sp:dc-stays-dc", !pc_n, {{"x", addr(x)}, {"step", step}});

        if (rep.on("sp:rem-not-pc") && !m.rem(x) && nn.rem(x))
            rep.check("sp:rem-not-pc", !pc_m, {{"x", addr(x)}, {"step", step}});

        bool left_changed = m.left(x) != nn.left(x);
        bool right_changed = m.right(x) != nn.right(x);
        bool dc_child_change = !pc_m && (left_changed != right_changed);

        for (KeyValue k : keys) {
            if (x != kBot && pre.kc(x, k)) {
                if (rep.on("sp:kc-persists") && pc_n)
                    rep.check("sp:kc-persists", post.kc(x, k),
                              {{"a", addr(x)}, {"k", key_text(k)}, {"step", step}});
                if (rep.on("sp:pkc-after-disconnect") && !post.kc(x, k)) {
                    W wit{{"x", addr(x)}, {"k", key_text(k)}, {"step", step}};
                    rep.check("sp:pkc-after-disconnect", post.pkc(x, k), wit);
                    if (m.key(x) == k)
                        rep.check("sp:pkc-after-disconnect",
                                  post.kc(nn.left(x), k) && post.kc(nn.right(x), k), wit);
                }
            }
            if (!pc_m && rep.on("sp:pdc-remains-pkc") && pre.pkc(x, k))
                rep.check("sp:pdc-remains-pkc", post.pkc(x, k),
                          {{"x", addr(x)},
                           {"k", key_text(k)},
                           {"before", to_string(pre.potential(x, k))},
                           {"step", step}});
            if (dc_child_change && rep.on("sp:dc-chd-leads-to-chd")) {
                Address ych = left_changed ? nn.left(x) : nn.right(x);
                Address zch = left_changed ? nn.right(x) : nn.left(x);
                // z=bot is k-connected for every absent k along unrelated paths
                if (zch != kBot && post.kc(zch, k))
                    rep.check("sp:dc-chd-leads-to-chd", post.kc(ych, k),
                              {{"x", addr(x)}, {"y", addr(ych)}, {"z", addr(zch)},
                               {"k", key_text(k)}, {"step", step}});
            }
        }
    }
    return out;
}

std::vector<Violation> check_state(const State& s, const CheckConfig& cfg) {
    Analysis a(s, cfg);
    auto out = check_state(a);
    for (auto& v : out)
        v.post_digest = digest_hex(s);
    return out;
}

std::vector<Violation> check_step(const State& pre, const StepLabel& label, const State& post,
                                  const CheckConfig& cfg) {
    Analysis a(pre, cfg), b(post, cfg);
    auto out = check_step(a, label, b);
    for (auto& v : out) {
        v.pre_digest = digest_hex(pre);
        v.post_digest = digest_hex(post);
    }
    return out;
}

}  // namespace cfset
