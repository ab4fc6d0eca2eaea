#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfset/semantics.hpp"
#include "cfset/state.hpp"

namespace cfset {

// states[i] is M_i; labels[i] is the step from M_i to M_{i+1}.
struct Trace {
    std::vector<State> states;
    std::vector<StepLabel> labels;

    std::size_t size() const { return labels.size(); }
    const State& back() const { return states.back(); }
};

class ReplayError : public std::runtime_error {
  public:
    ReplayError(std::size_t index, const std::string& what)
        : std::runtime_error(what), index_(index) {}
    std::size_t index() const { return index_; }

  private:
    std::size_t index_;
};

Trace replay(int num_workers, const std::vector<StepLabel>& script);

// Text format: '#' comments, "workers N", "mark NAME" (names the state
// reached so far), and one step label per line.
struct Script {
    int num_workers = 1;
    std::vector<StepLabel> steps;
    std::map<std::string, std::size_t> marks;
    std::vector<std::string> mark_order;
};

Script parse_script(std::istream& in);
Script load_script(const std::string& path);
void write_script(std::ostream& out, const Script& script, const std::string& header_comment);

}  // namespace cfset
