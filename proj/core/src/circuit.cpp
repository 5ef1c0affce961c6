#include "polyint/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>
#include <sstream>

#include "polyint/trajectory.hpp"

namespace polyint {

std::string_view to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Sum: return "sum";
        case NodeKind::Product: return "product";
        case NodeKind::Constant: return "constant";
        case NodeKind::Input: return "input";
        case NodeKind::Output: return "output";
        case NodeKind::Subgraph: return "subgraph";
        case NodeKind::Slot: return "slot";
        case NodeKind::Route: return "route";
    }
    return "?";
}

CoefficientCycle::CoefficientCycle(std::string name, std::vector<double> values, CycleMode mode)
    : name_(std::move(name)), initial_(std::move(values)), mode_(mode) {
    if (initial_.empty()) throw std::invalid_argument("coefficient cycle must not be empty");
    work_ = initial_;
}

double CoefficientCycle::current() const {
    if (mode_ == CycleMode::Positional) return initial_[position_];
    // Literal extraction: dot the one-hot selector with the (physically
    // rotated) array.
    double acc = 0.0;
    for (std::size_t j = 0; j < work_.size(); ++j) acc += (j == 0 ? 1.0 : 0.0) * work_[j];
    return acc;
}

void CoefficientCycle::rotate() {
    position_ = (position_ + 1) % initial_.size();
    if (mode_ == CycleMode::ShiftMatrix) {
        // new[i] = sum_j S[i][j] * old[j] with S the one-step cyclic shift.
        std::vector<double> next(work_.size(), 0.0);
        const std::size_t n = work_.size();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                next[i] += (j == (i + 1) % n ? 1.0 : 0.0) * work_[j];
        work_ = std::move(next);
    }
}

void CoefficientCycle::reset() {
    position_ = 0;
    work_ = initial_;
}

CoefficientCycle shift_rotate(CoefficientCycle cycle) {
    cycle.rotate();
    return cycle;
}

CircuitError::CircuitError(const std::string& msg, NodeId node, std::uint64_t micro_iteration)
    : std::runtime_error(msg), node(node), micro_iteration(micro_iteration) {}

NodeId Circuit::add_node(Node node) {
    if (finalized_) throw std::logic_error("circuit is finalized");
    if (node.width < 1) throw std::invalid_argument("node width must be >= 1");
    nodes_.push_back(std::move(node));
    in_edges_.emplace_back();
    node_cycles_.emplace_back();
    delay_init_.emplace_back();
    return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Circuit::add_sum(std::string name, int width, std::vector<double> bias) {
    if (!bias.empty() && static_cast<int>(bias.size()) != width)
        throw std::invalid_argument("bias width mismatch");
    return add_node({NodeKind::Sum, std::move(name), width, std::move(bias), {}, {}, 0, 0});
}

NodeId Circuit::add_product(std::string name, int width) {
    return add_node({NodeKind::Product, std::move(name), width, {}, {}, {}, 0, 0});
}

NodeId Circuit::add_constant(std::string name, std::vector<double> value) {
    const int width = static_cast<int>(value.size());
    return add_node({NodeKind::Constant, std::move(name), width, {}, std::move(value), {}, 0, 0});
}

NodeId Circuit::add_input(std::string name, int width) {
    return add_node({NodeKind::Input, std::move(name), width, {}, {}, {}, 0, 0});
}

NodeId Circuit::add_output(std::string name, int width) {
    return add_node({NodeKind::Output, std::move(name), width, {}, {}, {}, 0, 0});
}

NodeId Circuit::add_subgraph(std::string name, SubgraphRef sub) {
    if (!sub.circuit) throw std::invalid_argument("subgraph circuit missing");
    const int width = static_cast<int>(sub.outputs.size());
    return add_node(
        {NodeKind::Subgraph, std::move(name), width, {}, {}, std::move(sub), 0, 0});
}

NodeId Circuit::add_slot(std::string name, int lanes, int lane_width) {
    if (lanes < 1 || lane_width < 1) throw std::invalid_argument("bad slot shape");
    return add_node(
        {NodeKind::Slot, std::move(name), lanes * lane_width, {}, {}, {}, lanes, lane_width});
}

NodeId Circuit::add_route(std::string name, int lanes, int lane_width) {
    if (lanes < 1 || lane_width < 1) throw std::invalid_argument("bad route shape");
    return add_node(
        {NodeKind::Route, std::move(name), lane_width, {}, {}, {}, lanes, lane_width});
}

void Circuit::add_edge(NodeId src, NodeId dst, double weight, bool delayed) {
    if (finalized_) throw std::logic_error("circuit is finalized");
    if (src < 0 || src >= static_cast<NodeId>(nodes_.size()) || dst < 0 ||
        dst >= static_cast<NodeId>(nodes_.size()))
        throw std::invalid_argument("edge endpoint out of range");
    edges_.push_back({src, dst, weight, delayed});
    in_edges_[dst].push_back(static_cast<int>(edges_.size()) - 1);
}

int Circuit::bind_cycle(NodeId node, CoefficientCycle cycle) {
    if (node < 0 || node >= static_cast<NodeId>(nodes_.size()))
        throw std::invalid_argument("cycle bound to unknown node");
    cycles_.push_back({node, std::move(cycle)});
    const int index = static_cast<int>(cycles_.size()) - 1;
    node_cycles_[node].push_back(index);
    return index;
}

void Circuit::set_delay_init(NodeId node, std::vector<double> value) {
    if (node < 0 || node >= static_cast<NodeId>(nodes_.size()))
        throw std::invalid_argument("unknown node");
    if (static_cast<int>(value.size()) != nodes_[node].width)
        throw std::invalid_argument("delay init width mismatch");
    delay_init_[node] = std::move(value);
    if (finalized_) delay_state_[node] = delay_init_[node];
}

void Circuit::check_widths() const {
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        const Node& n = nodes_[id];
        const auto& in = in_edges_[id];
        auto src_width = [&](int ei) { return nodes_[edges_[ei].src].width; };
        switch (n.kind) {
            case NodeKind::Sum:
                if (in.empty() && n.bias.empty())
                    throw std::invalid_argument("sum node \"" + n.name +
                                                "\" needs an incoming edge or a bias");
                break;
            case NodeKind::Product:
                if (in.empty())
                    throw std::invalid_argument("product node \"" + n.name +
                                                "\" needs an incoming edge");
                break;
            case NodeKind::Output:
                if (in.empty())
                    throw std::invalid_argument("output node \"" + n.name +
                                                "\" needs an incoming edge");
                break;
            case NodeKind::Constant:
            case NodeKind::Input:
                if (!in.empty())
                    throw std::invalid_argument("node \"" + n.name + "\" cannot have inputs");
                break;
            case NodeKind::Subgraph: {
                if (in.size() != 1)
                    throw std::invalid_argument("subgraph node \"" + n.name +
                                                "\" needs exactly one incoming edge");
                const auto& sub = *n.sub;
                if (src_width(in[0]) != static_cast<int>(sub.inputs.size()))
                    throw std::invalid_argument("subgraph input width mismatch");
                break;
            }
            case NodeKind::Slot:
                if (in.size() != 1 || src_width(in[0]) != n.lane_width)
                    throw std::invalid_argument("slot node \"" + n.name +
                                                "\" needs one lane-width incoming edge");
                if (static_cast<int>(node_cycles_[id].size()) != n.lanes)
                    throw std::invalid_argument("slot node \"" + n.name +
                                                "\" needs one capture cycle per lane");
                break;
            case NodeKind::Route:
                if (in.size() != 1 || src_width(in[0]) != n.lanes * n.lane_width)
                    throw std::invalid_argument("route node \"" + n.name +
                                                "\" needs one slot-width incoming edge");
                if (static_cast<int>(node_cycles_[id].size()) != n.lanes)
                    throw std::invalid_argument("route node \"" + n.name +
                                                "\" needs one gate cycle per lane");
                break;
        }
        if (n.kind == NodeKind::Sum || n.kind == NodeKind::Product || n.kind == NodeKind::Output) {
            for (int ei : in) {
                const int w = src_width(ei);
                if (w != n.width && w != 1)
                    throw std::invalid_argument("width mismatch on edge into \"" + n.name + "\"");
            }
        }
        if (n.kind == NodeKind::Constant && !node_cycles_[id].empty()) {
            if (node_cycles_[id].size() != 1 || n.width != 1)
                throw std::invalid_argument("cycle-driven constant \"" + n.name +
                                            "\" must be scalar with a single cycle");
        }
        if (!node_cycles_[id].empty() && n.kind != NodeKind::Constant &&
            n.kind != NodeKind::Slot && n.kind != NodeKind::Route)
            throw std::invalid_argument("cycles can bind only to constant, slot or route nodes");
    }
}

void Circuit::compute_schedule() {
    const int n = static_cast<int>(nodes_.size());
    std::vector<int> pending(n, 0);
    std::vector<std::vector<NodeId>> dependents(n);
    for (const auto& e : edges_) {
        if (e.delayed) continue;
        ++pending[e.dst];
        dependents[e.src].push_back(e.dst);
    }
    std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
    for (NodeId id = 0; id < n; ++id)
        if (pending[id] == 0) ready.push(id);
    schedule_.clear();
    while (!ready.empty()) {
        const NodeId id = ready.top();
        ready.pop();
        schedule_.push_back(id);
        for (NodeId dep : dependents[id])
            if (--pending[dep] == 0) ready.push(dep);
    }
    if (static_cast<int>(schedule_.size()) != n) {
        for (NodeId id = 0; id < n; ++id)
            if (pending[id] > 0)
                throw std::invalid_argument("delay-free cycle through node \"" +
                                            nodes_[id].name + "\"");
    }
}

void Circuit::finalize() {
    if (finalized_) throw std::logic_error("circuit already finalized");
    check_widths();
    compute_schedule();
    delayed_sources_.clear();
    for (const auto& e : edges_)
        if (e.delayed) delayed_sources_.push_back(e.src);
    for (std::size_t id = 0; id < nodes_.size(); ++id)
        if (nodes_[id].kind == NodeKind::Slot) delayed_sources_.push_back(static_cast<NodeId>(id));
    std::sort(delayed_sources_.begin(), delayed_sources_.end());
    delayed_sources_.erase(std::unique(delayed_sources_.begin(), delayed_sources_.end()),
                           delayed_sources_.end());
    finalized_ = true;
    values_.resize(nodes_.size());
    delay_state_.resize(nodes_.size());
    slot_prev_.resize(nodes_.size());
    input_fed_.assign(nodes_.size(), 0);
    sub_scratch_.resize(nodes_.size());
    reset();
}

void Circuit::reset() {
    if (!finalized_) throw std::logic_error("circuit not finalized");
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        const Node& n = nodes_[id];
        values_[id].assign(n.width, 0.0);
        if (n.kind == NodeKind::Constant) {
            values_[id] = n.constant;
            if (!node_cycles_[id].empty())
                values_[id] = {cycles_[node_cycles_[id][0]].cycle.initial_values()[0]};
        }
        delay_state_[id] = delay_init_[id].empty() ? std::vector<double>(n.width, 0.0)
                                                   : delay_init_[id];
        if (n.kind == NodeKind::Slot) slot_prev_[id] = delay_state_[id];
    }
    std::fill(input_fed_.begin(), input_fed_.end(), 0);
    for (auto& bc : cycles_) bc.cycle.reset();
    micro_iteration_ = 0;
}

void Circuit::feed_input(NodeId node, std::vector<double> value) {
    if (node < 0 || node >= static_cast<NodeId>(nodes_.size()) ||
        nodes_[node].kind != NodeKind::Input)
        throw std::invalid_argument("feed_input needs an input node");
    if (static_cast<int>(value.size()) != nodes_[node].width)
        throw std::invalid_argument("input width mismatch");
    values_[node] = std::move(value);
    input_fed_[node] = 1;
}

const std::vector<double>& Circuit::edge_value(const Edge& e) const {
    return e.delayed ? delay_state_[e.src] : values_[e.src];
}

void Circuit::eval_node(NodeId id) {
    const Node& n = nodes_[id];
    auto& out = values_[id];
    switch (n.kind) {
        case NodeKind::Constant:
            if (!node_cycles_[id].empty())
                out[0] = cycles_[node_cycles_[id][0]].cycle.current();
            break;
        case NodeKind::Input:
            if (!input_fed_[id])
                throw CircuitError("input node \"" + n.name + "\" was never fed", id,
                                   micro_iteration_);
            break;
        case NodeKind::Sum:
        case NodeKind::Output: {
            for (int j = 0; j < n.width; ++j) out[j] = n.bias.empty() ? 0.0 : n.bias[j];
            for (int ei : in_edges_[id]) {
                const Edge& e = edges_[ei];
                const auto& v = edge_value(e);
                if (v.size() == 1) {
                    const double c = e.weight * v[0];
                    for (int j = 0; j < n.width; ++j) out[j] += c;
                } else {
                    for (int j = 0; j < n.width; ++j) out[j] += e.weight * v[j];
                }
            }
            break;
        }
        case NodeKind::Product: {
            for (int j = 0; j < n.width; ++j) out[j] = 1.0;
            for (int ei : in_edges_[id]) {
                const Edge& e = edges_[ei];
                const auto& v = edge_value(e);
                if (v.size() == 1) {
                    const double c = e.weight * v[0];
                    for (int j = 0; j < n.width; ++j) out[j] *= c;
                } else {
                    for (int j = 0; j < n.width; ++j) out[j] *= e.weight * v[j];
                }
            }
            break;
        }
        case NodeKind::Subgraph: {
            const auto& v = edge_value(edges_[in_edges_[id][0]]);
            const auto& sub = *n.sub;
            sub.circuit->eval_combinational(v, sub.inputs, sub.outputs, out, sub_scratch_[id]);
            break;
        }
        case NodeKind::Slot: {
            const auto& v = edge_value(edges_[in_edges_[id][0]]);
            out = slot_prev_[id];
            for (int lane = 0; lane < n.lanes; ++lane) {
                if (cycles_[node_cycles_[id][lane]].cycle.current() != 0.0) {
                    for (int j = 0; j < n.lane_width; ++j) out[lane * n.lane_width + j] = v[j];
                }
            }
            break;
        }
        case NodeKind::Route: {
            const auto& v = edge_value(edges_[in_edges_[id][0]]);
            for (int j = 0; j < n.lane_width; ++j) out[j] = 0.0;
            for (int lane = 0; lane < n.lanes; ++lane) {
                const double g = cycles_[node_cycles_[id][lane]].cycle.current();
                for (int j = 0; j < n.lane_width; ++j) out[j] += g * v[lane * n.lane_width + j];
            }
            break;
        }
    }
}

void Circuit::micro_step() {
    if (!finalized_) throw std::logic_error("circuit not finalized");
    for (NodeId id : schedule_) {
        eval_node(id);
        for (double v : values_[id]) {
            if (!std::isfinite(v))
                throw CircuitError("non-finite value at node \"" + nodes_[id].name +
                                       "\" on micro-iteration " +
                                       std::to_string(micro_iteration_),
                                   id, micro_iteration_);
        }
        if (trace_) {
            *trace_ << micro_iteration_ << ',' << id << ',' << nodes_[id].name << ','
                    << to_string(nodes_[id].kind) << ',';
            const auto& vals = values_[id];
            for (std::size_t j = 0; j < vals.size(); ++j)
                *trace_ << (j ? ";" : "") << format_double(vals[j]);
            *trace_ << '\n';
        }
    }
    // Commit: every consumer saw pre-step values above; now delayed sources
    // and slot registers latch, then every cycle rotates.
    for (NodeId src : delayed_sources_) delay_state_[src] = values_[src];
    for (std::size_t id = 0; id < nodes_.size(); ++id)
        if (nodes_[id].kind == NodeKind::Slot) slot_prev_[id] = values_[id];
    for (auto& bc : cycles_) bc.cycle.rotate();
    ++micro_iteration_;
}

const std::vector<double>& Circuit::read_node(NodeId node) const {
    if (node < 0 || node >= static_cast<NodeId>(nodes_.size()))
        throw std::out_of_range("read_node: unknown node id " + std::to_string(node));
    return values_[node];
}

const Node& Circuit::node(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
        throw std::out_of_range("unknown node id " + std::to_string(id));
    return nodes_[id];
}

std::vector<NodeId> Circuit::delayed_sources() const { return delayed_sources_; }

std::vector<const CoefficientCycle*> Circuit::cycles_of(NodeId node) const {
    if (node < 0 || node >= static_cast<NodeId>(nodes_.size()))
        throw std::out_of_range("unknown node id");
    std::vector<const CoefficientCycle*> result;
    for (int idx : node_cycles_[node]) result.push_back(&cycles_[idx].cycle);
    return result;
}

std::map<NodeKind, int> Circuit::census() const {
    std::map<NodeKind, int> counts;
    for (const auto& n : nodes_) ++counts[n.kind];
    return counts;
}

void Circuit::replace_node_cycles(NodeId node, std::vector<CoefficientCycle> cycles) {
    if (node < 0 || node >= static_cast<NodeId>(nodes_.size()))
        throw std::invalid_argument("unknown node");
    std::vector<BoundCycle> kept;
    for (auto& bc : cycles_)
        if (bc.node != node) kept.push_back(std::move(bc));
    for (auto& c : cycles) kept.push_back({node, std::move(c)});
    cycles_ = std::move(kept);
    for (auto& list : node_cycles_) list.clear();
    for (std::size_t i = 0; i < cycles_.size(); ++i)
        node_cycles_[cycles_[i].node].push_back(static_cast<int>(i));
}

void Circuit::revalidate() const { check_widths(); }

void Circuit::resize_lanes(NodeId slot, NodeId route, int lanes) {
    if (lanes < 1) throw std::invalid_argument("lanes must be >= 1");
    for (NodeId id : {slot, route}) {
        if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
            throw std::invalid_argument("unknown node");
        Node& n = nodes_[id];
        if (n.kind != NodeKind::Slot && n.kind != NodeKind::Route)
            throw std::invalid_argument("resize_lanes needs slot/route nodes");
        n.lanes = lanes;
        if (n.kind == NodeKind::Slot) n.width = lanes * n.lane_width;
    }
    if (finalized_) {
        delay_init_[slot].clear();
        values_[slot].assign(nodes_[slot].width, 0.0);
        delay_state_[slot].assign(nodes_[slot].width, 0.0);
        slot_prev_[slot].assign(nodes_[slot].width, 0.0);
    }
}

void Circuit::eval_combinational(std::span<const double> inputs,
                                 std::span<const NodeId> input_ids,
                                 std::span<const NodeId> output_ids, std::span<double> outputs,
                                 std::vector<double>& scratch) const {
    scratch.assign(nodes_.size(), 0.0);
    for (std::size_t k = 0; k < input_ids.size(); ++k) scratch[input_ids[k]] = inputs[k];
    for (NodeId id : schedule_) {
        const Node& n = nodes_[id];
        switch (n.kind) {
            case NodeKind::Input:
                break;  // already fed
            case NodeKind::Constant:
                scratch[id] = n.constant[0];
                break;
            case NodeKind::Sum:
            case NodeKind::Output: {
                double acc = n.bias.empty() ? 0.0 : n.bias[0];
                for (int ei : in_edges_[id]) acc += edges_[ei].weight * scratch[edges_[ei].src];
                scratch[id] = acc;
                break;
            }
            case NodeKind::Product: {
                double acc = 1.0;
                for (int ei : in_edges_[id]) acc *= edges_[ei].weight * scratch[edges_[ei].src];
                scratch[id] = acc;
                break;
            }
            default:
                throw std::logic_error("node kind not allowed in combinational evaluation");
        }
    }
    for (std::size_t k = 0; k < output_ids.size(); ++k) outputs[k] = scratch[output_ids[k]];
}

std::string to_dot(const Circuit& circuit) {
    std::ostringstream out;
    out << "digraph circuit {\n  rankdir=LR;\n";
    for (NodeId id = 0; id < static_cast<NodeId>(circuit.node_count()); ++id) {
        const Node& n = circuit.node(id);
        std::string shape = "ellipse";
        std::string label = n.name;
        switch (n.kind) {
            case NodeKind::Sum: label += "\\n+"; break;
            case NodeKind::Product: label += "\\nx"; break;
            case NodeKind::Constant: shape = "point"; break;
            case NodeKind::Input: shape = "circle"; break;
            case NodeKind::Output: shape = "diamond"; break;
            case NodeKind::Subgraph: shape = "box"; break;
            case NodeKind::Slot: shape = "box3d"; break;
            case NodeKind::Route: shape = "trapezium"; break;
        }
        out << "  n" << id << " [shape=" << shape << ", label=\"" << label << "\"";
        if (n.kind == NodeKind::Constant) out << ", xlabel=\"" << n.name << "\"";
        out << "];\n";
        const auto cycles = circuit.cycles_of(id);
        for (const auto* c : cycles) {
            out << "  // cycle " << c->name() << " on n" << id << ": [";
            const auto& vals = c->initial_values();
            for (std::size_t j = 0; j < vals.size(); ++j)
                out << (j ? ", " : "") << format_double(vals[j]);
            out << "] at position " << c->position() << "\n";
        }
    }
    for (const auto& e : circuit.edges()) {
        out << "  n" << e.src << " -> n" << e.dst << " [";
        bool first = true;
        if (e.delayed) {
            out << "style=dashed";
            first = false;
        }
        if (e.weight != 1.0) out << (first ? "" : ", ") << "label=\"" << format_double(e.weight) << "\"";
        out << "];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace polyint
