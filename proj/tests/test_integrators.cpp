#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "polyint/integrators.hpp"
#include "polyint/reference.hpp"

using namespace polyint;

namespace {

PolynomialSystem decay() {  // dx = -x
    return PolynomialSystem(1, 1, {{0, -1.0, Monomial{{1}}}});
}

PolynomialSystem zero_system() { return PolynomialSystem(1, 1, {}); }

PolynomialSystem lorenz() { return lorenz63(10.0, 28.0, 8.0 / 3.0); }

// In-test mirror of the circuit's scalar RK step for dx = -x in the ratio
// encoding: route folds over the slot lanes, the accumulator chain is
// A <- (0.0 + A*r) + k with the rotating ratio array, and the commit
// multiplies by the final live ratio entry.
double chain_rk_step(const ButcherTableau& tab, double x) {
    auto f = [](double v) { return 0.0 + (-1.0) * v; };
    const auto ratios = ratio_array(tab);
    const int s = tab.s;
    const int lanes = std::max(1, s - 1);
    std::vector<double> slots(lanes, 0.0);
    double accum = 0.0;
    for (int t = 0; t < s; ++t) {
        double route = 0.0;
        for (int lane = 0; lane < lanes; ++lane) route += tab.a[t][lane] * slots[lane];
        const double arg = (0.0 + x) + route;
        const double k = f(arg) * tab.h;
        const double scaled = t == 0 ? 0.0 : accum * ratios[t - 1];
        accum = (0.0 + scaled) + (1.0 * k);
        if (t < s - 1) slots[t] = k;
    }
    return (0.0 + x) + accum * ratios[s - 1];
}

double measured_order(const PolynomialSystem& sys, const std::vector<double>& hs,
                      const ButcherTableau* swap_to = nullptr) {
    const PolyNet net = compile(sys);
    std::vector<double> errors;
    const double exact = std::exp(-1.0);
    for (double h : hs) {
        const auto steps = static_cast<std::int64_t>(std::llround(1.0 / h));
        RkCircuit rk = build_rk_general(net, ButcherTableau::rk4(h));
        if (swap_to) {
            ButcherTableau target = *swap_to;
            target.h = h;
            swap_tableau(rk, target);
        }
        const Trajectory traj = integrate(rk, StateVector({1.0}), steps);
        errors.push_back(std::fabs(traj.states.back()[0] - exact));
    }
    return fit_order(hs, errors);
}

}  // namespace

TEST_CASE("rk4 single step on dx=-x matches the hand derivation") {
    // k1=-0.1, k2=-0.095, k3=-0.09525, k4=-0.090475, x1 = 1 - 0.570975/6
    const PolyNet net = compile(decay());
    RkCircuit rk = build_rk4(net, 0.1);
    const Trajectory traj = integrate(rk, StateVector({1.0}), 1);
    REQUIRE(traj.size() == 2);
    CHECK(traj.states[1][0] == doctest::Approx(0.9048375).epsilon(1e-12));
    CHECK(bit_equal(traj.states[1][0], chain_rk_step(ButcherTableau::rk4(0.1), 1.0)));
}

TEST_CASE("rk4 circuit carries the literal coefficient arrays") {
    const PolyNet net = compile(lorenz());
    RkCircuit rk = build_rk4(net, 0.01);
    const auto i1 = rk.circuit.cycles_of(rk.i1_node);
    const auto i2 = rk.circuit.cycles_of(rk.i2_node);
    const auto i3 = rk.circuit.cycles_of(rk.i3_node);
    REQUIRE(i1.size() == 1);
    CHECK(i1[0]->initial_values() == std::vector<double>{0, 0, 0, 0, 1});
    CHECK(i2[0]->initial_values() == std::vector<double>{0.5, 1.0, 2.0, 1.0 / 6.0, 0.0});
    CHECK(i3[0]->initial_values() == std::vector<double>{0.5, 0.5, 1.0, 0.0, 0.0});
    SUBCASE("the ratio array of the classical tableau reproduces i2") {
        const auto ratios = ratio_array(ButcherTableau::rk4(0.01));
        CHECK(ratios == i2[0]->initial_values());
    }
    SUBCASE("cycles return to their initial state after s+1 rotations") {
        integrate(rk, StateVector({1.0, 1.0, 1.0}), 3);  // any whole number of blocks
        CHECK(i1[0]->position() == 0);
        CHECK(i2[0]->position() == 0);
        CHECK(i3[0]->position() == 0);
    }
}

TEST_CASE("period law: the output node changes only on commit micro-steps") {
    const PolyNet net = compile(lorenz());
    RkCircuit rk = build_rk4(net, 0.01);
    rk.circuit.set_delay_init(rk.state_node, {1.0, 1.0, 1.0});
    rk.circuit.reset();
    std::vector<double> held = {1.0, 1.0, 1.0};
    for (int block = 0; block < 4; ++block) {
        for (int m = 0; m < 5; ++m) {
            rk.circuit.micro_step();
            const auto& out = rk.circuit.read_node(rk.output_node);
            if (m < 4) {
                for (int j = 0; j < 3; ++j) REQUIRE(bit_equal(out[j], held[j]));
            }
        }
        const auto& committed = rk.circuit.read_node(rk.output_node);
        bool changed = false;
        for (int j = 0; j < 3; ++j) changed |= !bit_equal(committed[j], held[j]);
        CHECK(changed);
        held.assign(committed.begin(), committed.end());
    }
}

TEST_CASE("zero derivative holds the state exactly") {
    const PolyNet net = compile(zero_system());
    RkCircuit rk = build_rk4(net, 0.25);
    const Trajectory traj = integrate(rk, StateVector({3.75}), 10);
    for (const auto& state : traj.states) CHECK(bit_equal(state[0], 3.75));
}

TEST_CASE("general euler and midpoint match hand values") {
    const PolyNet net = compile(decay());
    SUBCASE("euler: x1 = 1 - 0.1 = 0.9") {
        RkCircuit rk = build_rk_general(net, ButcherTableau::euler(0.1));
        CHECK(rk.encoding == WeightEncoding::Ratio);
        const Trajectory traj = integrate(rk, StateVector({1.0}), 1);
        CHECK(std::fabs(traj.states[1][0] - 0.9) <= 1e-15);
    }
    SUBCASE("midpoint: x1 = 1 - 0.1*(1 - 0.05) = 0.905, via the direct fallback") {
        RkCircuit rk = build_rk_general(net, ButcherTableau::midpoint(0.1));
        CHECK(rk.encoding == WeightEncoding::Direct);  // b1 = 0 breaks the ratio array
        const Trajectory traj = integrate(rk, StateVector({1.0}), 1);
        CHECK(std::fabs(traj.states[1][0] - 0.905) <= 1e-15);
    }
    SUBCASE("forcing the ratio encoding on midpoint throws") {
        CHECK_THROWS_AS(build_rk_general(net, ButcherTableau::midpoint(0.1),
                                         WeightEncoding::Ratio),
                        std::invalid_argument);
    }
}

TEST_CASE("general rk4 matches the fixed circuit bitwise on lorenz") {
    const PolyNet net = compile(lorenz());
    RkCircuit fixed = build_rk4(net, 0.01);
    RkCircuit general = build_rk_general(net, ButcherTableau::rk4(0.01));
    const StateVector x0({1.0, 1.0, 1.0});
    const Trajectory a = integrate(fixed, x0, 250);
    const Trajectory b = integrate(general, x0, 250);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) REQUIRE(bit_equal(a.states[k], b.states[k]));
}

TEST_CASE("horner ratio chain equals the direct weighted sum") {
    std::mt19937_64 rng(1618);
    std::uniform_real_distribution<double> wd(0.2, 2.0);
    std::uniform_real_distribution<double> kd(-3.0, 3.0);
    std::bernoulli_distribution sign(0.5);
    for (int trial = 0; trial < 200; ++trial) {
        const int s = 1 + static_cast<int>(rng() % 7);
        ButcherTableau tab;
        tab.s = s;
        tab.h = 1.0;
        tab.a.assign(s, std::vector<double>(s, 0.0));
        for (int i = 0; i < s; ++i) tab.b.push_back((sign(rng) ? 1.0 : -1.0) * wd(rng));
        const auto ratios = ratio_array(tab);
        std::vector<double> k(s);
        for (auto& v : k) v = kd(rng);
        double accum = 0.0;
        for (int t = 0; t < s; ++t) {
            const double scaled = t == 0 ? 0.0 : accum * ratios[t - 1];
            accum = (0.0 + scaled) + k[t];
        }
        const double chain = accum * ratios[s - 1];
        double direct = 0.0;
        for (int t = 0; t < s; ++t) direct += tab.b[t] * k[t];
        const double scale = std::max({1.0, std::fabs(chain), std::fabs(direct)});
        REQUIRE(std::fabs(chain - direct) / scale <= 1e-13);
    }
}

TEST_CASE("node-kind census is independent of the stage count") {
    const PolyNet net = compile(lorenz());
    ButcherTableau six;
    six.s = 6;
    six.h = 0.01;
    six.a.assign(6, std::vector<double>(6, 0.0));
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < i; ++j) six.a[i][j] = 0.1;
    six.b.assign(6, 1.0 / 6.0);

    std::vector<RkCircuit> circuits;
    circuits.push_back(build_rk_general(net, ButcherTableau::euler(0.01)));
    circuits.push_back(build_rk_general(net, ButcherTableau::midpoint(0.01)));
    circuits.push_back(build_rk_general(net, ButcherTableau::rk4(0.01)));
    circuits.push_back(build_rk_general(net, six));
    const auto reference_census = circuits[0].circuit.census();
    for (const auto& rk : circuits) {
        const auto counts = rk.circuit.census();
        CHECK(counts.at(NodeKind::Sum) == reference_census.at(NodeKind::Sum));
        CHECK(counts.at(NodeKind::Product) == reference_census.at(NodeKind::Product));
        CHECK(counts.at(NodeKind::Subgraph) == reference_census.at(NodeKind::Subgraph));
        CHECK(rk.circuit.node_count() == circuits[0].circuit.node_count());
    }
    SUBCASE("only array widths grow") {
        CHECK(circuits[0].circuit.node(circuits[0].slot_node).width == 3);   // 1 lane
        CHECK(circuits[2].circuit.node(circuits[2].slot_node).width == 9);   // 3 lanes
        CHECK(circuits[3].circuit.node(circuits[3].slot_node).width == 15);  // 5 lanes
    }
}

TEST_CASE("tableau hot-swap switches the measured order on live circuits") {
    const std::vector<double> hs = {0.1, 0.05, 0.025};
    const double rk4_order = measured_order(decay(), hs);
    CHECK(rk4_order == doctest::Approx(4.0).epsilon(0.05));

    const ButcherTableau euler = ButcherTableau::euler(0.1);
    const double swapped_order = measured_order(decay(), hs, &euler);
    CHECK(swapped_order == doctest::Approx(1.0).epsilon(0.05));

    SUBCASE("swap leaves the graph untouched") {
        const PolyNet net = compile(decay());
        RkCircuit rk = build_rk_general(net, ButcherTableau::rk4(0.1));
        const auto nodes_before = rk.circuit.node_count();
        const auto edges_before = rk.circuit.edges().size();
        const auto census_before = rk.circuit.census();
        swap_tableau(rk, ButcherTableau::euler(0.1));
        CHECK(rk.circuit.node_count() == nodes_before);
        CHECK(rk.circuit.edges().size() == edges_before);
        CHECK(rk.circuit.census() == census_before);
        CHECK(rk.tableau.s == 1);
    }
    SUBCASE("swap validates the step size and topology") {
        const PolyNet net = compile(decay());
        RkCircuit general = build_rk_general(net, ButcherTableau::rk4(0.1));
        CHECK_THROWS_AS(swap_tableau(general, ButcherTableau::euler(0.2)),
                        std::invalid_argument);
        RkCircuit fixed = build_rk4(net, 0.1);
        CHECK_THROWS_AS(swap_tableau(fixed, ButcherTableau::euler(0.1)), std::logic_error);
    }
}

TEST_CASE("abm2 hand values with an explicit second state") {
    const PolyNet net = compile(decay());
    AbmCircuit abm = build_abm2(net, 0.1);
    const StateVector x0({1.0});
    const StateVector x1({0.9048374});
    const Trajectory traj = integrate(abm, x0, 2, SeedPolicy::ExplicitSecondState, &x1);
    REQUIRE(traj.size() == 3);
    // P2 = x1 + 0.15*(-x1) + 0.05*1 = 0.8191118, x2 = x1 + 0.05*(-P2 - x1)
    CHECK(abm.circuit.read_node(abm.predictor_node)[0] ==
          doctest::Approx(0.8191118).epsilon(1e-7));
    CHECK(traj.states[2][0] == doctest::Approx(0.8186399).epsilon(1e-7));
}

TEST_CASE("abm2 with rk4 bootstrap composes the two hand computations") {
    const PolyNet net = compile(decay());
    AbmCircuit abm = build_abm2(net, 0.1);
    const Trajectory traj = integrate(abm, StateVector({1.0}), 2, SeedPolicy::Rk4Bootstrap);
    REQUIRE(traj.size() == 3);
    CHECK(traj.states[1][0] == doctest::Approx(0.9048375).epsilon(1e-12));
    // Composing the two hand computations with the bootstrap seed 0.9048375:
    // P2 = 0.85*x1 + 0.05 = 0.819111875, x2 = x1 - 0.05*(P2 + x1)
    CHECK(traj.states[2][0] == doctest::Approx(0.81864003125).epsilon(1e-12));
    CHECK(std::fabs(traj.states[2][0] - 0.8186399) <= 1.5e-7);  // the seed shifts digit 8
}

TEST_CASE("abm2 zero system is the identity") {
    const PolyNet net = compile(zero_system());
    AbmCircuit abm = build_abm2(net, 0.5);
    const Trajectory traj = integrate(abm, StateVector({-2.5}), 8, SeedPolicy::Rk4Bootstrap);
    for (const auto& state : traj.states) CHECK(bit_equal(state[0], -2.5));
}

TEST_CASE("abm2 refuses to step unseeded") {
    const PolyNet net = compile(decay());
    AbmCircuit abm = build_abm2(net, 0.1);
    CHECK_THROWS_AS(abm_step(abm), std::logic_error);
    seed(abm, StateVector({1.0}), StateVector({0.9048374}));
    CHECK_NOTHROW(abm_step(abm));
}

TEST_CASE("abm2 evaluates the subgraph exactly twice per step") {
    const PolyNet net = compile(lorenz());
    AbmCircuit abm = build_abm2(net, 0.01);
    seed(abm, StateVector({1.0, 1.0, 1.0}));
    std::ostringstream trace;
    abm.circuit.set_trace(&trace);
    for (int step = 0; step < 3; ++step) abm_step(abm);
    abm.circuit.set_trace(nullptr);
    std::istringstream rows(trace.str());
    std::string line;
    std::map<std::string, int> subgraph_rows_per_micro;
    while (std::getline(rows, line)) {
        if (line.find(",subgraph,") != std::string::npos)
            ++subgraph_rows_per_micro[line.substr(0, line.find(','))];
    }
    REQUIRE(subgraph_rows_per_micro.size() == 3);
    for (const auto& [micro, count] : subgraph_rows_per_micro) CHECK(count == 2);
}

TEST_CASE("integrate with zero steps returns only the initial state") {
    const PolyNet net = compile(lorenz());
    RkCircuit rk = build_rk4(net, 0.01);
    const StateVector x0({0.5, -0.5, 20.0});
    const Trajectory traj = integrate(rk, x0, 0);
    REQUIRE(traj.size() == 1);
    CHECK(bit_equal(traj.states[0], x0));
    CHECK(traj.times == std::vector<double>{0.0});

    AbmCircuit abm = build_abm2(net, 0.01);
    const Trajectory at = integrate(abm, x0, 0, SeedPolicy::Rk4Bootstrap);
    CHECK(at.size() == 1);
}

TEST_CASE("trajectory times advance by h") {
    const PolyNet net = compile(decay());
    RkCircuit rk = build_rk4(net, 0.125);
    const Trajectory traj = integrate(rk, StateVector({1.0}), 8);
    for (std::size_t k = 0; k < traj.size(); ++k)
        CHECK(traj.times[k] == static_cast<double>(k) * 0.125);
}

TEST_CASE("blow-up raises an error carrying the partial trajectory") {
    // dx = x^2 with h = 1 escapes to infinity within a few steps.
    PolynomialSystem quad(1, 2, {{0, 1.0, Monomial{{2}}}});
    const PolyNet net = compile(quad);
    RkCircuit rk = build_rk4(net, 1.0);
    bool threw = false;
    try {
        integrate(rk, StateVector({1.0}), 50);
    } catch (const BlowupError& e) {
        threw = true;
        CHECK(e.step_index >= 1);
        CHECK(e.partial.size() == e.step_index);  // x0 .. x_{step-1}
        for (const auto& state : e.partial.states) CHECK(std::isfinite(state[0]));
    }
    CHECK(threw);
}

TEST_CASE("builders validate the step size") {
    const PolyNet net = compile(decay());
    CHECK_THROWS_AS(build_rk4(net, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(build_rk4(net, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(build_abm2(net, 0.0), std::invalid_argument);
}

TEST_CASE("integrate validates the initial state length") {
    const PolyNet net = compile(lorenz());
    RkCircuit rk = build_rk4(net, 0.01);
    CHECK_THROWS_AS(integrate(rk, StateVector({1.0}), 1), std::invalid_argument);
}
