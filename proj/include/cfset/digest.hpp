#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfset/state.hpp"

namespace cfset {

// Renaming from raw address ids to canonical ids: Root, Bot, then BFS from
// Root, then BFS from each process register in fixed order, then whatever
// remains in allocation order.
std::vector<std::uint32_t> canonical_order(const State& s);

// Compact byte string; equal iff the states are equal up to address renaming.
std::string canonical_form(const State& s);

std::uint64_t canonical_digest(const State& s);
std::string digest_hex(const State& s);

// Textual form using canonical ids, written into counterexample files.
std::string canonical_text(const State& s);

}  // namespace cfset
