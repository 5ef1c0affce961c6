#include "polyint/integrators.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace polyint {

namespace {

WeightEncoding resolve_encoding(const ButcherTableau& tab, WeightEncoding requested, bool warn) {
    switch (requested) {
        case WeightEncoding::Ratio:
            if (!ratio_encodable(tab))
                throw std::invalid_argument("ratio encoding undefined: tableau has a zero weight");
            return WeightEncoding::Ratio;
        case WeightEncoding::Direct:
            return WeightEncoding::Direct;
        case WeightEncoding::Auto:
            if (ratio_encodable(tab)) return WeightEncoding::Ratio;
            if (warn)
                std::cerr << "polyint: tableau has a zero weight; falling back to the "
                             "direct-weights encoding\n";
            return WeightEncoding::Direct;
    }
    return WeightEncoding::Direct;
}

void warn_inconsistent(const ButcherTableau& tab) {
    if (auto w = consistency_warning(tab)) std::cerr << "polyint: " << *w << "\n";
}

// Cycle emission at micro-step t of a block is values[t]. Consumers wired
// through a delayed edge therefore see values[t-1] (initially 0), which is
// how the rotating arrays line up with stage indices and how the trailing
// zero of the weight array resets the accumulator on the next block's
// first micro-step.
std::vector<double> one_hot_last(int length) {
    std::vector<double> v(length, 0.0);
    v.back() = 1.0;
    return v;
}

std::vector<double> weight_cycle_values(const ButcherTableau& tab, WeightEncoding enc) {
    if (enc == WeightEncoding::Ratio) return ratio_array(tab);
    std::vector<double> v(tab.s + 1, 1.0);  // hold, ..., hold, reset
    v.back() = 0.0;
    return v;
}

std::vector<double> stage_weight_values(const ButcherTableau& tab, WeightEncoding enc) {
    if (enc == WeightEncoding::Ratio) return std::vector<double>(tab.s + 1, 1.0);
    std::vector<double> v = tab.b;  // b_i applied as k_i is accumulated
    v.push_back(0.0);
    return v;
}

std::vector<CoefficientCycle> capture_cycles(const ButcherTableau& tab, int lanes) {
    std::vector<CoefficientCycle> cycles;
    for (int lane = 0; lane < lanes; ++lane) {
        std::vector<double> v(tab.s + 1, 0.0);
        if (lane < tab.s - 1) v[lane] = 1.0;  // the dummy lane of s=1 never captures
        cycles.emplace_back("capture" + std::to_string(lane), std::move(v));
    }
    return cycles;
}

std::vector<CoefficientCycle> route_cycles(const ButcherTableau& tab, int lanes) {
    std::vector<CoefficientCycle> cycles;
    for (int lane = 0; lane < lanes; ++lane) {
        std::vector<double> v;  // column `lane` of a, then the commit step's zero
        for (int i = 0; i < tab.s; ++i) v.push_back(tab.a[i][lane]);
        v.push_back(0.0);
        cycles.emplace_back("route" + std::to_string(lane), std::move(v));
    }
    return cycles;
}

}  // namespace

RkCircuit build_rk4(const PolyNet& net, double h) {
    if (!(h > 0.0) || !std::isfinite(h))
        throw std::invalid_argument("step size must be positive and finite");
    const int n = net.n_inputs;
    RkCircuit rk;
    rk.tableau = ButcherTableau::rk4(h);
    rk.encoding = WeightEncoding::Ratio;
    rk.fixed_topology = true;

    Circuit& c = rk.circuit;
    rk.i1_node = c.add_constant("i1", {0.0});
    rk.i2_node = c.add_constant("i2", {0.0});
    rk.i3_node = c.add_constant("i3", {0.0});
    rk.h_node = c.add_constant("h", {h});
    rk.state_node = c.add_sum("state", n);
    rk.accum_scaled_node = c.add_product("accum_scaled", n);
    rk.commit_node = c.add_product("commit", n);
    rk.gate_node = c.add_product("k_gate", n);
    rk.arg_node = c.add_sum("stage_arg", n);
    rk.f_node = c.add_subgraph("f", net.as_subgraph());
    rk.k_node = c.add_product("k", n);
    rk.accum_node = c.add_sum("accum", n);
    rk.output_node = c.add_output("output", n);

    c.add_edge(rk.state_node, rk.state_node, 1.0, true);
    c.add_edge(rk.commit_node, rk.state_node);
    c.add_edge(rk.accum_node, rk.accum_scaled_node, 1.0, true);
    c.add_edge(rk.i2_node, rk.accum_scaled_node, 1.0, true);
    c.add_edge(rk.i1_node, rk.commit_node);
    c.add_edge(rk.accum_scaled_node, rk.commit_node);
    c.add_edge(rk.i3_node, rk.gate_node, 1.0, true);
    c.add_edge(rk.k_node, rk.gate_node, 1.0, true);
    c.add_edge(rk.state_node, rk.arg_node, 1.0, true);
    c.add_edge(rk.gate_node, rk.arg_node);
    c.add_edge(rk.arg_node, rk.f_node);
    c.add_edge(rk.f_node, rk.k_node);
    c.add_edge(rk.h_node, rk.k_node);
    c.add_edge(rk.accum_scaled_node, rk.accum_node);
    c.add_edge(rk.k_node, rk.accum_node);
    c.add_edge(rk.state_node, rk.output_node);

    c.bind_cycle(rk.i1_node, CoefficientCycle("i1", {0.0, 0.0, 0.0, 0.0, 1.0}));
    c.bind_cycle(rk.i2_node, CoefficientCycle("i2", {0.5, 1.0, 2.0, 1.0 / 6.0, 0.0}));
    c.bind_cycle(rk.i3_node, CoefficientCycle("i3", {0.5, 0.5, 1.0, 0.0, 0.0}));

    c.finalize();
    return rk;
}

RkCircuit build_rk_general(const PolyNet& net, const ButcherTableau& tab,
                           WeightEncoding encoding) {
    validate(tab);
    warn_inconsistent(tab);
    const WeightEncoding enc = resolve_encoding(tab, encoding, true);
    const int n = net.n_inputs;
    const int lanes = std::max(1, tab.s - 1);

    RkCircuit rk;
    rk.tableau = tab;
    rk.encoding = enc;

    Circuit& c = rk.circuit;
    rk.i1_node = c.add_constant("i1", {0.0});
    rk.i2_node = c.add_constant("i2", {0.0});
    rk.weight_node = c.add_constant("bw", {0.0});
    rk.h_node = c.add_constant("h", {tab.h});
    rk.state_node = c.add_sum("state", n);
    rk.accum_scaled_node = c.add_product("accum_scaled", n);
    rk.commit_node = c.add_product("commit", n);
    rk.slot_node = c.add_slot("k_slots", lanes, n);
    rk.route_node = c.add_route("k_route", lanes, n);
    rk.arg_node = c.add_sum("stage_arg", n);
    rk.f_node = c.add_subgraph("f", net.as_subgraph());
    rk.k_node = c.add_product("k", n);
    rk.weighted_k_node = c.add_product("k_weighted", n);
    rk.accum_node = c.add_sum("accum", n);
    rk.output_node = c.add_output("output", n);

    c.add_edge(rk.state_node, rk.state_node, 1.0, true);
    c.add_edge(rk.commit_node, rk.state_node);
    c.add_edge(rk.accum_node, rk.accum_scaled_node, 1.0, true);
    c.add_edge(rk.i2_node, rk.accum_scaled_node, 1.0, true);
    c.add_edge(rk.i1_node, rk.commit_node);
    c.add_edge(rk.accum_scaled_node, rk.commit_node);
    c.add_edge(rk.k_node, rk.slot_node);
    c.add_edge(rk.slot_node, rk.route_node, 1.0, true);
    c.add_edge(rk.state_node, rk.arg_node, 1.0, true);
    c.add_edge(rk.route_node, rk.arg_node);
    c.add_edge(rk.arg_node, rk.f_node);
    c.add_edge(rk.f_node, rk.k_node);
    c.add_edge(rk.h_node, rk.k_node);
    c.add_edge(rk.weight_node, rk.weighted_k_node);
    c.add_edge(rk.k_node, rk.weighted_k_node);
    c.add_edge(rk.accum_scaled_node, rk.accum_node);
    c.add_edge(rk.weighted_k_node, rk.accum_node);
    c.add_edge(rk.state_node, rk.output_node);

    c.bind_cycle(rk.i1_node, CoefficientCycle("i1", one_hot_last(tab.s + 1)));
    c.bind_cycle(rk.i2_node, CoefficientCycle("i2", weight_cycle_values(tab, enc)));
    c.bind_cycle(rk.weight_node, CoefficientCycle("bw", stage_weight_values(tab, enc)));
    for (auto& cycle : capture_cycles(tab, lanes)) c.bind_cycle(rk.slot_node, std::move(cycle));
    for (auto& cycle : route_cycles(tab, lanes)) c.bind_cycle(rk.route_node, std::move(cycle));

    c.finalize();
    return rk;
}

void swap_tableau(RkCircuit& rk, const ButcherTableau& tab, WeightEncoding encoding) {
    if (rk.fixed_topology)
        throw std::logic_error("tableau swap needs the general circuit form");
    validate(tab);
    if (tab.h != rk.tableau.h)
        throw std::invalid_argument("step size is fixed at build time; rebuild to change it");
    warn_inconsistent(tab);
    const WeightEncoding enc = resolve_encoding(tab, encoding, true);
    const int lanes = std::max(1, tab.s - 1);

    Circuit& c = rk.circuit;
    c.resize_lanes(rk.slot_node, rk.route_node, lanes);
    c.replace_node_cycles(rk.i1_node, {CoefficientCycle("i1", one_hot_last(tab.s + 1))});
    c.replace_node_cycles(rk.i2_node, {CoefficientCycle("i2", weight_cycle_values(tab, enc))});
    c.replace_node_cycles(rk.weight_node,
                          {CoefficientCycle("bw", stage_weight_values(tab, enc))});
    c.replace_node_cycles(rk.slot_node, capture_cycles(tab, lanes));
    c.replace_node_cycles(rk.route_node, route_cycles(tab, lanes));
    c.revalidate();
    c.reset();
    rk.tableau = tab;
    rk.encoding = enc;
}

AbmCircuit build_abm2(const PolyNet& net, double h) {
    if (!(h > 0.0) || !std::isfinite(h))
        throw std::invalid_argument("step size must be positive and finite");
    const int n = net.n_inputs;
    AbmCircuit abm;
    abm.net = net;
    abm.h = h;

    Circuit& c = abm.circuit;
    const NodeId pred_fwd_const = c.add_constant("3h/2", {1.5 * h});
    const NodeId pred_back_const = c.add_constant("-h/2", {-0.5 * h});
    const NodeId corr_const = c.add_constant("h/2", {0.5 * h});
    abm.state_node = c.add_sum("state", n);
    abm.f_state_node = c.add_subgraph("f_state", net.as_subgraph());
    const NodeId pred_fwd = c.add_product("pred_fwd", n);
    const NodeId pred_back = c.add_product("pred_back", n);
    abm.predictor_node = c.add_sum("predictor", n);
    abm.f_pred_node = c.add_subgraph("f_pred", net.as_subgraph());
    const NodeId f_sum = c.add_sum("f_sum", n);
    const NodeId corr = c.add_product("corrector", n);
    abm.output_node = c.add_output("output", n);

    c.add_edge(abm.state_node, abm.state_node, 1.0, true);
    c.add_edge(corr, abm.state_node);
    c.add_edge(abm.state_node, abm.f_state_node, 1.0, true);
    c.add_edge(pred_fwd_const, pred_fwd);
    c.add_edge(abm.f_state_node, pred_fwd);
    c.add_edge(pred_back_const, pred_back);
    c.add_edge(abm.f_state_node, pred_back, 1.0, true);  // f(x_{n-1}) held by the delay
    c.add_edge(abm.state_node, abm.predictor_node, 1.0, true);
    c.add_edge(pred_fwd, abm.predictor_node);
    c.add_edge(pred_back, abm.predictor_node);
    c.add_edge(abm.predictor_node, abm.f_pred_node);
    c.add_edge(abm.f_pred_node, f_sum);
    c.add_edge(abm.f_state_node, f_sum);
    c.add_edge(corr_const, corr);
    c.add_edge(f_sum, corr);
    c.add_edge(abm.state_node, abm.output_node);

    c.finalize();
    return abm;
}

void seed(AbmCircuit& abm, const StateVector& x0, const StateVector& x1) {
    const int n = abm.net.n_inputs;
    if (static_cast<int>(x0.size()) != n || static_cast<int>(x1.size()) != n)
        throw std::invalid_argument("seed state length must equal the system dimension");
    abm.circuit.set_delay_init(abm.state_node, x1.values());
    const StateVector f0 = polynet_eval(abm.net, x0);
    abm.circuit.set_delay_init(abm.f_state_node, f0.values());
    abm.circuit.reset();
    abm.seeded = true;
}

void seed(AbmCircuit& abm, const StateVector& x0) {
    RkCircuit bootstrap = build_rk4(abm.net, abm.h);
    const Trajectory first = integrate(bootstrap, x0, 1);
    seed(abm, x0, first.states.back());
}

StateVector abm_step(AbmCircuit& abm) {
    if (!abm.seeded)
        throw std::logic_error("AbmCircuit needs both seed states before stepping");
    abm.circuit.micro_step();
    return StateVector::unchecked(abm.circuit.read_node(abm.output_node));
}

Trajectory integrate(RkCircuit& rk, const StateVector& x0, std::int64_t n_steps) {
    if (n_steps < 0) throw std::invalid_argument("n_steps must be >= 0");
    if (static_cast<int>(x0.size()) != rk.circuit.node(rk.state_node).width)
        throw std::invalid_argument("initial state length must equal the system dimension");
    rk.circuit.set_delay_init(rk.state_node, x0.values());
    rk.circuit.reset();

    Trajectory traj;
    traj.method = rk.fixed_topology ? "rk4" : "rk" + std::to_string(rk.tableau.s);
    traj.h = rk.tableau.h;
    traj.times.push_back(0.0);
    traj.states.push_back(x0);
    const int period = rk.micro_period();
    for (std::int64_t step = 1; step <= n_steps; ++step) {
        try {
            for (int m = 0; m < period; ++m) rk.circuit.micro_step();
        } catch (const CircuitError& e) {
            throw BlowupError(std::string("integration blew up at step ") +
                                  std::to_string(step) + ": " + e.what(),
                              static_cast<std::size_t>(step), traj);
        }
        traj.times.push_back(static_cast<double>(step) * rk.tableau.h);
        traj.states.push_back(StateVector::unchecked(rk.circuit.read_node(rk.output_node)));
    }
    return traj;
}

Trajectory integrate(AbmCircuit& abm, const StateVector& x0, std::int64_t n_steps,
                     SeedPolicy policy, const StateVector* x1) {
    if (n_steps < 0) throw std::invalid_argument("n_steps must be >= 0");
    if (static_cast<int>(x0.size()) != abm.net.n_inputs)
        throw std::invalid_argument("initial state length must equal the system dimension");
    Trajectory traj;
    traj.method = "abm2";
    traj.h = abm.h;
    traj.times.push_back(0.0);
    traj.states.push_back(x0);
    if (n_steps == 0) return traj;

    StateVector x1v;
    if (policy == SeedPolicy::ExplicitSecondState) {
        if (!x1) throw std::invalid_argument("explicit seed policy needs the second state");
        x1v = *x1;
    } else {
        RkCircuit bootstrap = build_rk4(abm.net, abm.h);
        x1v = integrate(bootstrap, x0, 1).states.back();
    }
    seed(abm, x0, x1v);
    traj.times.push_back(abm.h);
    traj.states.push_back(x1v);
    for (std::int64_t step = 2; step <= n_steps; ++step) {
        try {
            abm.circuit.micro_step();
        } catch (const CircuitError& e) {
            throw BlowupError(std::string("integration blew up at step ") +
                                  std::to_string(step) + ": " + e.what(),
                              static_cast<std::size_t>(step), traj);
        }
        traj.times.push_back(static_cast<double>(step) * abm.h);
        traj.states.push_back(StateVector::unchecked(abm.circuit.read_node(abm.output_node)));
    }
    return traj;
}

}  // namespace polyint
