#pragma once

#include <cstdint>
#include <vector>

#include "polyint/butcher.hpp"
#include "polyint/circuit.hpp"
#include "polyint/polynet.hpp"
#include "polyint/trajectory.hpp"

namespace polyint {

/// A recurrent circuit performing explicit Runge-Kutta integration of the
/// embedded PolyNet. One time step takes s+1 micro-steps; the output node
/// changes value only on micro-steps that are multiples of s+1 and holds
/// the previous state in between.
///
/// A state register feeds the embedded derivative subgraph through a gated
/// stage argument; each stage value k_i = h*f(...) is captured into a
/// lane-structured slot register and routed into later stage arguments,
/// while an accumulator driven by the rotating weight array folds the
/// weighted stage sum. The weight array's trailing zero resets the
/// accumulator at the start of every block; a one-hot cycle with the high
/// bit last gates the state commit.
struct RkCircuit {
    Circuit circuit;
    ButcherTableau tableau;
    WeightEncoding encoding = WeightEncoding::Ratio;  // resolved, never Auto
    bool fixed_topology = false;  // build_rk4's single-register form

    NodeId state_node = -1;
    NodeId arg_node = -1;
    NodeId f_node = -1;
    NodeId k_node = -1;
    NodeId accum_node = -1;
    NodeId accum_scaled_node = -1;
    NodeId commit_node = -1;
    NodeId slot_node = -1;        // general form only
    NodeId route_node = -1;       // general form only
    NodeId gate_node = -1;        // fixed form only: previous-k gate
    NodeId weight_node = -1;      // general form only: per-stage b gate constant
    NodeId weighted_k_node = -1;  // general form only: b-gated stage value
    NodeId output_node = -1;
    NodeId i1_node = -1;  // commit one-hot constant
    NodeId i2_node = -1;  // weight/ratio array constant
    NodeId i3_node = -1;  // fixed form only: stage-argument array constant
    NodeId h_node = -1;

    int micro_period() const { return tableau.s + 1; }
};

/// The fixed fourth-order circuit with the literal coefficient arrays
/// i1 = [0,0,0,0,1], i2 = [1/2,1,2,1/6,0], i3 = [1/2,1/2,1,0,0] and a
/// single previous-stage register in place of the slot array.
RkCircuit build_rk4(const PolyNet& net, double h);

/// General explicit RK circuit from a tableau. The node-kind census is
/// independent of the stage count; only coefficient-array lengths and the
/// slot register width grow with s. With encoding Auto, a tableau with any
/// zero b_i falls back to the direct-weights encoding with a warning;
/// Ratio then throws instead.
RkCircuit build_rk_general(const PolyNet& net, const ButcherTableau& tab,
                           WeightEncoding encoding = WeightEncoding::Auto);

/// Switches the method order of a live general-form circuit by rebuilding
/// only the coefficient cycles and slot lanes; node ids and edges are
/// untouched. The step size is fixed at build time and must match.
void swap_tableau(RkCircuit& rk, const ButcherTableau& tab,
                  WeightEncoding encoding = WeightEncoding::Auto);

/// Two-step Adams-Bashforth-Moulton predictor-corrector circuit. One
/// micro-step per time step; the derivative at the current state is
/// evaluated once and reused by predictor and corrector (two subgraph
/// evaluations per step), while the previous-step derivative arrives
/// through a delayed edge. Requires two seeded states before stepping.
struct AbmCircuit {
    Circuit circuit;
    PolyNet net;  // kept for bootstrap seeding
    double h = 0.0;

    NodeId state_node = -1;
    NodeId f_state_node = -1;  // also the delayed previous-derivative source
    NodeId predictor_node = -1;
    NodeId f_pred_node = -1;
    NodeId output_node = -1;

    bool seeded = false;

    int micro_period() const { return 1; }
};

AbmCircuit build_abm2(const PolyNet& net, double h);

enum class SeedPolicy { Rk4Bootstrap, ExplicitSecondState };

/// Loads the two starting states. With the single-argument form, x1 is
/// produced by one step of the fixed RK4 circuit on the same PolyNet.
void seed(AbmCircuit& abm, const StateVector& x0);
void seed(AbmCircuit& abm, const StateVector& x0, const StateVector& x1);

/// One predictor-corrector step; throws std::logic_error when unseeded.
StateVector abm_step(AbmCircuit& abm);

/// Runs micro-steps in blocks of the circuit period, harvesting the output
/// node once per block; returns x_0 .. x_{n_steps} with t_k = k*h. On a
/// non-finite value throws BlowupError carrying the partial trajectory.
Trajectory integrate(RkCircuit& rk, const StateVector& x0, std::int64_t n_steps);
Trajectory integrate(AbmCircuit& abm, const StateVector& x0, std::int64_t n_steps,
                     SeedPolicy policy, const StateVector* x1 = nullptr);

}  // namespace polyint
