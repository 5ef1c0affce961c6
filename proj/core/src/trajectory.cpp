#include "polyint/trajectory.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace polyint {

BlowupError::BlowupError(const std::string& msg, std::size_t step_index, Trajectory partial)
    : std::runtime_error(msg), step_index(step_index), partial(std::move(partial)) {}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw std::invalid_argument("bad number: \"" + text + "\"");
    return v;
}

void write_csv(const Trajectory& traj, std::ostream& out) {
    const std::size_t n = traj.states.empty() ? 0 : traj.states[0].size();
    out << "step,t";
    for (std::size_t j = 0; j < n; ++j) out << ",x" << j;
    out << '\n';
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        out << k << ',' << format_double(traj.times[k]);
        for (std::size_t j = 0; j < n; ++j) out << ',' << format_double(traj.states[k][j]);
        out << '\n';
    }
}

Trajectory read_csv(std::istream& in) {
    Trajectory traj;
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("trajectory CSV is empty");
    if (line.rfind("step,t", 0) != 0)
        throw std::invalid_argument("trajectory CSV header must start with step,t");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() < 2) throw std::invalid_argument("short trajectory CSV row");
        traj.times.push_back(parse_double(cells[1]));
        std::vector<double> state;
        for (std::size_t j = 2; j < cells.size(); ++j) state.push_back(parse_double(cells[j]));
        traj.states.push_back(StateVector::unchecked(std::move(state)));
    }
    return traj;
}

}  // namespace polyint
