#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "polyint/circuit.hpp"
#include "polyint/polyode.hpp"

namespace polyint {

/// A polynomial system realized as a three-layer circuit: N inputs, one
/// product node per distinct monomial of degree >= 2 (shared across
/// outputs, with d_j unit-weight edges from input j), and N linear output
/// nodes carrying the constant coefficients as biases. Degree-1 terms are
/// direct input-to-output edges. Evaluating the circuit reproduces
/// eval_derivative bit for bit.
struct PolyNet {
    int n_inputs = 0;
    std::vector<Monomial> hidden_nodes;             // degree >= 2, grlex order
    std::vector<double> output_biases;              // c_{n,0}
    std::vector<std::vector<double>> linear_weights;  // [output][input]
    std::map<std::pair<int, int>, double> hidden_weights;  // (output, hidden) -> c

    std::shared_ptr<const Circuit> circuit;
    std::vector<NodeId> input_ids;
    std::vector<NodeId> output_ids;

    SubgraphRef as_subgraph() const { return {circuit, input_ids, output_ids}; }
};

/// Compiles a system into its PolyNet. Deterministic: two compilations of
/// the same system produce structurally identical circuits.
PolyNet compile(const PolynomialSystem& sys);

/// Feeds x through the realized circuit.
StateVector polynet_eval(const PolyNet& net, const StateVector& x);
void polynet_eval_raw(const PolyNet& net, std::span<const double> x, std::span<double> out,
                      std::vector<double>& scratch);

/// Upper bound on hidden product nodes: monomial_count(N, D) - (1 + N).
std::int64_t hidden_node_bound(int n_vars, int max_degree);

/// Graphviz rendering with monomial labels and edge weights (unit weights
/// left implicit).
std::string polynet_to_dot(const PolyNet& net);

}  // namespace polyint
