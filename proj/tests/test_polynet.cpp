#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "polyint/polynet.hpp"

using namespace polyint;

namespace {

PolynomialSystem random_system(std::mt19937_64& rng, int max_vars = 4, int max_deg = 3) {
    std::uniform_int_distribution<int> nd(1, max_vars);
    std::uniform_int_distribution<int> dd(0, max_deg);
    std::uniform_real_distribution<double> cd(-2.0, 2.0);
    std::bernoulli_distribution keep(0.4);
    const int n = nd(rng);
    const int d = dd(rng);
    std::vector<Term> terms;
    for (const auto& m : enumerate_monomials(n, d))
        for (int out = 0; out < n; ++out)
            if (keep(rng)) terms.push_back({out, cd(rng), m});
    return PolynomialSystem(n, d, std::move(terms));
}

StateVector random_state(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> xd(-3.0, 3.0);
    std::vector<double> v(n);
    for (auto& x : v) x = xd(rng);
    return StateVector(std::move(v));
}

}  // namespace

TEST_CASE("lorenz compiles to two shared hidden nodes") {
    const auto net = compile(lorenz63(10.0, 28.0, 8.0 / 3.0));
    REQUIRE(net.hidden_nodes.size() == 2);
    CHECK(net.hidden_nodes[0].text() == "x0*x1");
    CHECK(net.hidden_nodes[1].text() == "x0*x2");
    CHECK(hidden_node_bound(3, 2) == 6);
    CHECK(net.output_biases == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(net.linear_weights[0][0] == -10.0);
    CHECK(net.linear_weights[0][1] == 10.0);
    CHECK(net.hidden_weights.at({1, 1}) == -1.0);  // -x0*x2 into output 1
    CHECK(net.hidden_weights.at({2, 0}) == 1.0);   // +x0*x1 into output 2
}

TEST_CASE("lorenz polynet evaluates through the circuit") {
    const auto net = compile(lorenz63(10.0, 28.0, 8.0 / 3.0));
    const auto d = polynet_eval(net, StateVector({1.0, 1.0, 1.0}));
    CHECK(d[0] == 0.0);
    CHECK(d[1] == 26.0);
    CHECK(d[2] == doctest::Approx(-5.0 / 3.0).epsilon(1e-15));
    CHECK(bit_equal(d, eval_derivative(lorenz63(10.0, 28.0, 8.0 / 3.0),
                                       StateVector({1.0, 1.0, 1.0}))));
}

TEST_CASE("constants-only system compiles to biases") {
    PolynomialSystem sys(2, 0, {{0, 3.5, Monomial{{0, 0}}}, {1, -1.25, Monomial{{0, 0}}}});
    const auto net = compile(sys);
    CHECK(net.hidden_nodes.empty());
    for (const auto& row : net.linear_weights)
        for (double w : row) CHECK(w == 0.0);
    CHECK(net.output_biases == std::vector<double>{3.5, -1.25});
    const auto out = polynet_eval(net, StateVector({9.0, -4.0}));
    CHECK(out[0] == 3.5);
    CHECK(out[1] == -1.25);
}

TEST_CASE("zero state returns the biases exactly") {
    std::mt19937_64 rng(5150);
    for (int trial = 0; trial < 20; ++trial) {
        const auto sys = random_system(rng);
        const auto net = compile(sys);
        const auto out = polynet_eval(net, StateVector(std::vector<double>(sys.n_vars(), 0.0)));
        for (int j = 0; j < sys.n_vars(); ++j) CHECK(bit_equal(out[j], net.output_biases[j]));
    }
}

TEST_CASE("dense degree-2 system in three variables uses six hidden nodes") {
    std::vector<Term> terms;
    for (const auto& m : enumerate_monomials(3, 2))
        for (int out = 0; out < 3; ++out) terms.push_back({out, 1.0, m});
    const auto net = compile(PolynomialSystem(3, 2, std::move(terms)));
    CHECK(net.hidden_nodes.size() == 6);  // 10 - (1+3)
    CHECK(static_cast<std::int64_t>(net.hidden_nodes.size()) == hidden_node_bound(3, 2));
}

TEST_CASE("exactness: circuit evaluation equals direct evaluation bitwise") {
    std::mt19937_64 rng(424242);
    for (int trial = 0; trial < 60; ++trial) {
        const auto sys = random_system(rng);
        const auto net = compile(sys);
        for (int p = 0; p < 200; ++p) {
            const auto x = random_state(rng, sys.n_vars());
            REQUIRE(bit_equal(polynet_eval(net, x), eval_derivative(sys, x)));
        }
    }
}

TEST_CASE("hidden node count respects the bound") {
    std::mt19937_64 rng(777);
    for (int trial = 0; trial < 40; ++trial) {
        const auto sys = random_system(rng);
        const auto net = compile(sys);
        CHECK(static_cast<std::int64_t>(net.hidden_nodes.size()) <=
              hidden_node_bound(sys.n_vars(), sys.max_degree()));
        for (const auto& m : net.hidden_nodes) {
            CHECK(m.degree() >= 2);
            CHECK(m.degree() <= sys.max_degree());
        }
    }
}

TEST_CASE("monomials shared across outputs compile to one node") {
    PolynomialSystem sys(2, 2, {{0, 2.0, Monomial{{1, 1}}}, {1, -3.0, Monomial{{1, 1}}}});
    const auto net = compile(sys);
    CHECK(net.hidden_nodes.size() == 1);
    CHECK(net.hidden_weights.at({0, 0}) == 2.0);
    CHECK(net.hidden_weights.at({1, 0}) == -3.0);
}

TEST_CASE("no dead hidden nodes") {
    std::mt19937_64 rng(31337);
    for (int trial = 0; trial < 30; ++trial) {
        const auto sys = random_system(rng);
        const auto net = compile(sys);
        std::vector<bool> referenced(net.hidden_nodes.size(), false);
        for (const auto& [key, w] : net.hidden_weights) {
            CHECK(w != 0.0);
            referenced[key.second] = true;
        }
        for (bool r : referenced) CHECK(r);
    }
}

TEST_CASE("compilation is deterministic") {
    std::mt19937_64 rng(2020);
    const auto sys = random_system(rng);
    const auto a = compile(sys);
    const auto b = compile(sys);
    REQUIRE(a.circuit->node_count() == b.circuit->node_count());
    for (NodeId id = 0; id < static_cast<NodeId>(a.circuit->node_count()); ++id) {
        CHECK(a.circuit->node(id).kind == b.circuit->node(id).kind);
        CHECK(a.circuit->node(id).name == b.circuit->node(id).name);
    }
    REQUIRE(a.circuit->edges().size() == b.circuit->edges().size());
    for (std::size_t i = 0; i < a.circuit->edges().size(); ++i) {
        CHECK(a.circuit->edges()[i].src == b.circuit->edges()[i].src);
        CHECK(a.circuit->edges()[i].dst == b.circuit->edges()[i].dst);
        CHECK(bit_equal(a.circuit->edges()[i].weight, b.circuit->edges()[i].weight));
    }
    CHECK(a.circuit->schedule() == b.circuit->schedule());
}

TEST_CASE("power edges expand as repeated multiplication") {
    // dx0 = x0^3: three unit edges from the input to one product node
    PolynomialSystem sys(1, 3, {{0, 1.0, Monomial{{3}}}});
    const auto net = compile(sys);
    REQUIRE(net.hidden_nodes.size() == 1);
    int unit_edges = 0;
    for (const auto& e : net.circuit->edges())
        if (e.src == net.input_ids[0] && e.weight == 1.0) ++unit_edges;
    CHECK(unit_edges == 3);
    const auto out = polynet_eval(net, StateVector({-1.5}));
    CHECK(out[0] == -1.5 * -1.5 * -1.5);
}

TEST_CASE("dot export labels monomials and weights") {
    const auto net = compile(lorenz63(10.0, 28.0, 8.0 / 3.0));
    const std::string dot = polynet_to_dot(net);
    CHECK(dot.find("x0*x2") != std::string::npos);
    CHECK(dot.find("x0*x1") != std::string::npos);
    CHECK(dot.find("28") != std::string::npos);
    CHECK(dot.find("digraph") != std::string::npos);
}

TEST_CASE("eval validates input length") {
    const auto net = compile(lorenz63(10.0, 28.0, 8.0 / 3.0));
    CHECK_THROWS_AS(polynet_eval(net, StateVector({1.0})), std::invalid_argument);
}
