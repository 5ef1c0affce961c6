#include "polyint/polynet.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "polyint/trajectory.hpp"

namespace polyint {

std::int64_t hidden_node_bound(int n_vars, int max_degree) {
    // Clamped at zero: for max_degree 0 the raw formula goes negative while
    // the hidden layer is simply empty.
    return std::max<std::int64_t>(0, monomial_count(n_vars, max_degree) - (1 + n_vars));
}

PolyNet compile(const PolynomialSystem& sys) {
    const int n = sys.n_vars();
    PolyNet net;
    net.n_inputs = n;
    net.output_biases.assign(n, 0.0);
    net.linear_weights.assign(n, std::vector<double>(n, 0.0));

    // Distinct degree >= 2 monomials across all outputs, one product node
    // each, in grlex order.
    auto cmp = [](const Monomial& a, const Monomial& b) { return grlex_less(a, b); };
    std::set<Monomial, decltype(cmp)> hidden(cmp);
    for (const auto& t : sys.terms()) {
        const int d = t.monomial.degree();
        if (d == 0) {
            net.output_biases[t.output_index] = t.coefficient;
        } else if (d == 1) {
            const auto& exps = t.monomial.exponents;
            const int i = static_cast<int>(std::find(exps.begin(), exps.end(), 1) - exps.begin());
            net.linear_weights[t.output_index][i] = t.coefficient;
        } else {
            hidden.insert(t.monomial);
        }
    }
    net.hidden_nodes.assign(hidden.begin(), hidden.end());
    auto hidden_index = [&](const Monomial& m) {
        return static_cast<int>(std::lower_bound(net.hidden_nodes.begin(),
                                                 net.hidden_nodes.end(), m, cmp) -
                                net.hidden_nodes.begin());
    };
    for (const auto& t : sys.terms())
        if (t.monomial.degree() >= 2)
            net.hidden_weights[{t.output_index, hidden_index(t.monomial)}] = t.coefficient;

    // Realize the three layers. Edge insertion order fixes the fold order
    // of every node; output edges follow the canonical term order so the
    // circuit accumulates exactly like eval_derivative.
    Circuit c;
    for (int j = 0; j < n; ++j) net.input_ids.push_back(c.add_input("x" + std::to_string(j), 1));
    std::vector<NodeId> hidden_ids;
    for (const auto& m : net.hidden_nodes) {
        const NodeId id = c.add_product(m.text(), 1);
        for (int j = 0; j < n; ++j)
            for (int e = 0; e < m.exponents[j]; ++e) c.add_edge(net.input_ids[j], id, 1.0);
        hidden_ids.push_back(id);
    }
    for (int out = 0; out < n; ++out)
        net.output_ids.push_back(
            c.add_sum("xdot" + std::to_string(out), 1, {net.output_biases[out]}));
    for (const auto& t : sys.terms()) {
        const int d = t.monomial.degree();
        if (d == 1) {
            const auto& exps = t.monomial.exponents;
            const int i = static_cast<int>(std::find(exps.begin(), exps.end(), 1) - exps.begin());
            c.add_edge(net.input_ids[i], net.output_ids[t.output_index], t.coefficient);
        } else if (d >= 2) {
            c.add_edge(hidden_ids[hidden_index(t.monomial)], net.output_ids[t.output_index],
                       t.coefficient);
        }
    }
    c.finalize();
    net.circuit = std::make_shared<const Circuit>(std::move(c));
    return net;
}

void polynet_eval_raw(const PolyNet& net, std::span<const double> x, std::span<double> out,
                      std::vector<double>& scratch) {
    net.circuit->eval_combinational(x, net.input_ids, net.output_ids, out, scratch);
}

StateVector polynet_eval(const PolyNet& net, const StateVector& x) {
    if (static_cast<int>(x.size()) != net.n_inputs)
        throw std::invalid_argument("state length must equal the PolyNet input count");
    std::vector<double> out(net.n_inputs);
    std::vector<double> scratch;
    polynet_eval_raw(net, x.values(), out, scratch);
    return StateVector::unchecked(std::move(out));
}

std::string polynet_to_dot(const PolyNet& net) {
    std::ostringstream out;
    out << "digraph polynet {\n  rankdir=LR;\n";
    const Circuit& c = *net.circuit;
    for (NodeId id = 0; id < static_cast<NodeId>(c.node_count()); ++id) {
        const Node& node = c.node(id);
        const char* shape = node.kind == NodeKind::Input     ? "circle"
                            : node.kind == NodeKind::Product ? "ellipse"
                                                             : "doublecircle";
        out << "  n" << id << " [shape=" << shape << ", label=\"";
        if (node.kind == NodeKind::Product)
            out << node.name << "\\nx";
        else if (node.kind == NodeKind::Sum)
            out << node.name << "\\n+ (bias " << format_double(node.bias[0]) << ")";
        else
            out << node.name;
        out << "\"];\n";
    }
    for (const auto& e : c.edges()) {
        out << "  n" << e.src << " -> n" << e.dst;
        if (e.weight != 1.0) out << " [label=\"" << format_double(e.weight) << "\"]";
        out << ";\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace polyint
