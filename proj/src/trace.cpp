#include "cfset/trace.hpp"

#include <fstream>
#include <sstream>

namespace cfset {

Trace replay(int num_workers, const std::vector<StepLabel>& script) {
    Trace t;
    t.states.push_back(initial_state(num_workers));
    for (std::size_t i = 0; i < script.size(); ++i) {
        const State& cur = t.states.back();
        if (auto reason = disabled_reason(cur, script[i]))
            throw ReplayError(i, "step " + std::to_string(i) + " '" + to_string(script[i]) +
                                     "' not enabled: " + *reason);
        t.states.push_back(apply_step(cur, script[i]));
        t.labels.push_back(script[i]);
    }
    return t;
}

Script parse_script(std::istream& in) {
    Script script;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        std::istringstream words(line);
        std::string first;
        if (!(words >> first))
            continue;
        try {
            if (first == "workers") {
                if (!(words >> script.num_workers) || script.num_workers < 1)
                    throw std::invalid_argument("bad worker count");
            } else if (first == "mark") {
                std::string name;
                if (!(words >> name))
                    throw std::invalid_argument("mark needs a name");
                script.marks[name] = script.steps.size();
                script.mark_order.push_back(name);
            } else {
                script.steps.push_back(parse_step_label(line));
            }
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return script;
}

Script load_script(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open script " + path);
    return parse_script(in);
}

void write_script(std::ostream& out, const Script& script, const std::string& header_comment) {
    std::istringstream header(header_comment);
    std::string line;
    while (std::getline(header, line))
        out << "# " << line << '\n';
    out << "workers " << script.num_workers << '\n';
    std::map<std::size_t, std::vector<std::string>> marks_at;
    for (const auto& name : script.mark_order)
        marks_at[script.marks.at(name)].push_back(name);
    for (std::size_t i = 0; i <= script.steps.size(); ++i) {
        if (auto it = marks_at.find(i); it != marks_at.end())
            for (const auto& name : it->second)
                out << "mark " << name << '\n';
        if (i < script.steps.size())
            out << to_string(script.steps[i]) << '\n';
    }
}

}  // namespace cfset
