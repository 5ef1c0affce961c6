#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyint/polyode.hpp"

namespace polyint {

/// Time-indexed solution sequence x_0 .. x_n with t_k = k*h.
struct Trajectory {
    std::vector<double> times;
    std::vector<StateVector> states;
    std::string method;
    double h = 0.0;
    bool matched = false;  // classical runs: circuit-matched operation order

    std::size_t size() const { return states.size(); }
};

/// Raised when an integration produces a non-finite value. Carries the
/// trajectory accumulated so far and the failing step index.
struct BlowupError : std::runtime_error {
    BlowupError(const std::string& msg, std::size_t step_index, Trajectory partial);
    std::size_t step_index;
    Trajectory partial;
};

/// CSV with header `step,t,x0,...,x{N-1}`; numbers use the shortest
/// representation that parses back to the identical bits.
void write_csv(const Trajectory& traj, std::ostream& out);
Trajectory read_csv(std::istream& in);

std::string format_double(double v);
double parse_double(const std::string& text);

}  // namespace polyint
