#include "cfset/digest.hpp"

#include <cstdio>
#include <deque>
#include <functional>
#include <sstream>

namespace cfset {

namespace {

constexpr std::uint32_t kUnassigned = UINT32_MAX;

std::vector<Address> register_roots(const State& s) {
    std::vector<Address> out;
    for (const auto& w : s.workers) {
        out.push_back(w.nd);
        out.push_back(w.nxt);
    }
    const auto& y = s.sys;
    for (Address a : {y.prt0, y.nd0, y.r0, y.l0, y.lr0, y.rl0, y.chd0})
        out.push_back(a);
    return out;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

std::vector<std::uint32_t> canonical_order(const State& s) {
    std::vector<std::uint32_t> rename(s.nodes.size(), kUnassigned);
    std::uint32_t next = 0;
    std::deque<Address> queue;
    auto visit = [&](Address a) {
        if (rename[a.id] == kUnassigned) {
            rename[a.id] = next++;
            queue.push_back(a);
        }
    };
    auto drain = [&] {
        while (!queue.empty()) {
            Address a = queue.front();
            queue.pop_front();
            visit(s.left(a));
            visit(s.right(a));
        }
    };
    rename[kRoot.id] = next++;
    rename[kBot.id] = next++;
    queue.push_back(kRoot);
    drain();
    for (Address a : register_roots(s)) {
        visit(a);
        drain();
    }
    for (std::uint32_t i = 0; i < s.nodes.size(); ++i) {
        visit(Address{i});
        drain();
    }
    return rename;
}

std::string canonical_form(const State& s) {
    auto rename = canonical_order(s);
    std::vector<std::uint32_t> by_canon(s.nodes.size());
    for (std::uint32_t i = 0; i < rename.size(); ++i)
        by_canon[rename[i]] = i;
    auto id = [&](Address a) { return rename[a.id]; };

    std::string out;
    out.reserve(s.nodes.size() * 14 + s.workers.size() * 16 + 40);
    put_u32(out, static_cast<std::uint32_t>(s.nodes.size()));
    for (std::uint32_t raw : by_canon) {
        const auto& n = s.nodes[raw];
        out.push_back(static_cast<char>(n.key.kind()));
        put_u32(out, n.key.is_fin() ? n.key.value() : 0);
        put_u32(out, id(n.left));
        put_u32(out, id(n.right));
        out.push_back(static_cast<char>((n.del ? 1 : 0) | (n.rem ? 2 : 0)));
        out.push_back(static_cast<char>(s.lock_owner[raw] + 1));
    }
    for (const auto& w : s.workers) {
        out.push_back(static_cast<char>(w.ctrl));
        out.push_back(static_cast<char>(w.k.kind()));
        put_u32(out, w.k.is_fin() ? w.k.value() : 0);
        put_u32(out, id(w.nd));
        put_u32(out, id(w.nxt));
        out.push_back(static_cast<char>(w.return_val ? (*w.return_val ? 2 : 1) : 0));
        put_u32(out, w.ops_started);
    }
    const auto& y = s.sys;
    out.push_back(static_cast<char>(y.ctrl));
    out.push_back(static_cast<char>(y.lft0 ? 1 : 0));
    for (Address a : {y.prt0, y.nd0, y.r0, y.l0, y.lr0, y.rl0, y.chd0})
        put_u32(out, id(a));
    put_u32(out, y.ops_started);
    return out;
}

std::uint64_t canonical_digest(const State& s) {
    return std::hash<std::string>{}(canonical_form(s));
}

std::string digest_hex(const State& s) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(canonical_digest(s)));
    return buf;
}

std::string canonical_text(const State& s) {
    auto rename = canonical_order(s);
    std::vector<std::uint32_t> by_canon(s.nodes.size());
    for (std::uint32_t i = 0; i < rename.size(); ++i)
        by_canon[rename[i]] = i;
    auto name = [&](Address a) { return "n" + std::to_string(rename[a.id]); };

    std::ostringstream out;
    for (std::uint32_t raw : by_canon) {
        const auto& n = s.nodes[raw];
        out << name(Address{raw}) << " key=" << n.key.to_string() << " left=" << name(n.left)
            << " right=" << name(n.right) << " del=" << n.del << " rem=" << n.rem;
        if (s.lock_owner[raw] != kNoOwner)
            out << " lock=" << s.lock_owner[raw];
        out << '\n';
    }
    for (ProcessId p = 1; p <= s.num_workers(); ++p) {
        const auto& w = s.worker(p);
        out << "p" << p << " ctrl=" << to_string(w.ctrl) << " k=" << w.k.to_string()
            << " nd=" << name(w.nd) << " nxt=" << name(w.nxt) << " ret="
            << (w.return_val ? (*w.return_val ? "true" : "false") : "-")
            << " ops=" << w.ops_started << '\n';
    }
    const auto& y = s.sys;
    out << "sys ctrl=" << to_string(y.ctrl) << " prt0=" << name(y.prt0) << " lft0=" << y.lft0
        << " nd0=" << name(y.nd0) << " r0=" << name(y.r0) << " l0=" << name(y.l0)
        << " lr0=" << name(y.lr0) << " rl0=" << name(y.rl0) << " chd0=" << name(y.chd0)
        << " ops=" << y.ops_started << '\n';
    return out.str();
}

}  // namespace cfset
