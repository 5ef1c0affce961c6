#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "polyint/butcher.hpp"
#include "polyint/polyode.hpp"
#include "polyint/trajectory.hpp"

namespace polyint {

/// One explicit RK step, classically computed.
///
/// matched = true mirrors the circuit's floating-point operation order
/// exactly (canonical-order derivative evaluation, gated stage-argument
/// folds, the rotating-weight accumulator chain), so the result is
/// bitwise equal to the neural circuit's. matched = false is the textbook
/// order: stage arguments accumulate a_ij*k_j left to right and the update
/// adds sum(b_i*k_i) folded left to right; it differs from the matched
/// order only by rounding, which is what the divergence experiments
/// measure.
StateVector classical_rk_step(const PolynomialSystem& sys, const ButcherTableau& tab,
                              const StateVector& x, bool matched,
                              WeightEncoding encoding = WeightEncoding::Auto);

Trajectory classical_rk_integrate(const PolynomialSystem& sys, const ButcherTableau& tab,
                                  const StateVector& x0, std::int64_t n_steps, bool matched,
                                  WeightEncoding encoding = WeightEncoding::Auto);

/// Derivative cache carried between ABM2 steps: f at the state one step
/// behind the current one.
struct Abm2Cache {
    std::vector<double> prev_deriv;
    bool seeded = false;
};

/// One predictor-corrector step from x_n; the cache must hold f(x_{n-1}).
/// Returns x_{n+1} and the cache for the next call (f(x_n), computed once
/// and reused by predictor and corrector).
std::pair<StateVector, Abm2Cache> classical_abm2_step(const PolynomialSystem& sys,
                                                      const StateVector& x_n,
                                                      const Abm2Cache& cache, double h,
                                                      bool matched);

Trajectory classical_abm2_integrate(const PolynomialSystem& sys, const StateVector& x0,
                                    std::int64_t n_steps, double h, bool matched,
                                    bool rk4_bootstrap, const StateVector* x1 = nullptr);

/// Pointwise Euclidean distance between two trajectories on the same grid.
struct DivergenceSeries {
    std::vector<double> times;
    std::vector<double> distances;
};

DivergenceSeries divergence(const Trajectory& a, const Trajectory& b);

/// CSV with header `t,distance`.
void write_csv(const DivergenceSeries& series, std::ostream& out);

enum class MethodKind { Rk4, Abm2 };

/// For each delta, integrates the matched classical method from x0 and
/// from x0 perturbed by delta along one coordinate and records the
/// divergence; also records neural-vs-naive-classical divergence for the
/// unperturbed run. Per-delta runs execute in parallel.
struct PerturbationResult {
    std::vector<double> deltas;
    std::vector<double> realized_deltas;  // |perturbed x0 - x0|, may be 0
    std::vector<DivergenceSeries> perturbed;
    DivergenceSeries neural_vs_naive;
};

PerturbationResult perturbation_experiment(const PolynomialSystem& sys, MethodKind method,
                                           double h, std::int64_t n_steps, const StateVector& x0,
                                           const std::vector<double>& deltas, int direction = 0);

/// Least-squares slope of log(error) against log(h): the observed order of
/// accuracy.
double fit_order(std::span<const double> hs, std::span<const double> errors);

/// Integrates n_steps of matched classical RK4 and returns the final state
/// (used to land on an attractor before an experiment).
StateVector spin_up(const PolynomialSystem& sys, const StateVector& x0, std::int64_t n_steps,
                    double h);

}  // namespace polyint
