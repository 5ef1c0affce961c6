#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace polyint {

using NodeId = int;

/// Sum adds all incoming values (seeded by an optional bias), Product
/// multiplies them, Constant holds a fixed value or the current emission of
/// a bound coefficient cycle, Input is fed externally, Output is an
/// observation point, Subgraph evaluates an embedded combinational circuit
/// in one step. Slot is a lane-structured register with one-hot capture
/// gating and Route contracts a slot register against per-lane gate cycles;
/// together they form the stage-value array whose width, not node count,
/// grows with the method's stage count.
enum class NodeKind { Sum, Product, Constant, Input, Output, Subgraph, Slot, Route };

std::string_view to_string(NodeKind kind);

/// A delayed edge delivers the source value from the previous
/// micro-iteration and holds it until the next commit.
struct Edge {
    NodeId src = -1;
    NodeId dst = -1;
    double weight = 1.0;
    bool delayed = false;
};

enum class CycleMode {
    Positional,  ///< rotation advances an index, values never move
    ShiftMatrix  ///< literal one-hot extraction and shift-matrix multiply
};

/// Rotating coefficient array: reading yields the value at the current
/// position, rotation advances by one modulo length. After length rotations
/// the cycle is back in its initial state. Both modes emit identical
/// sequences; ShiftMatrix performs the extraction/shift arithmetic
/// explicitly instead of moving an index.
class CoefficientCycle {
  public:
    CoefficientCycle() = default;
    CoefficientCycle(std::string name, std::vector<double> values,
                     CycleMode mode = CycleMode::Positional);

    double current() const;
    void rotate();
    void reset();

    const std::string& name() const { return name_; }
    std::size_t length() const { return initial_.size(); }
    std::size_t position() const { return position_; }
    const std::vector<double>& initial_values() const { return initial_; }
    CycleMode mode() const { return mode_; }

  private:
    std::string name_;
    std::vector<double> initial_;
    std::vector<double> work_;  // ShiftMatrix: physically rotated copy
    std::size_t position_ = 0;
    CycleMode mode_ = CycleMode::Positional;
};

/// Value-semantics rotation, equivalent to cycle.rotate() on a copy.
CoefficientCycle shift_rotate(CoefficientCycle cycle);

class Circuit;

/// An embedded delay-free circuit evaluated as a single node: the incoming
/// vector is scattered onto scalar input nodes, outputs are gathered in
/// order.
struct SubgraphRef {
    std::shared_ptr<const Circuit> circuit;
    std::vector<NodeId> inputs;
    std::vector<NodeId> outputs;
};

struct Node {
    NodeKind kind = NodeKind::Sum;
    std::string name;
    int width = 1;
    std::vector<double> bias;      // Sum: accumulator seed; empty = zeros
    std::vector<double> constant;  // Constant only
    std::optional<SubgraphRef> sub;
    int lanes = 0;       // Slot/Route
    int lane_width = 0;  // Slot/Route
};

struct CircuitError : std::runtime_error {
    CircuitError(const std::string& msg, NodeId node, std::uint64_t micro_iteration);
    NodeId node;
    std::uint64_t micro_iteration;
};

/// Recurrent dataflow graph with a deterministic schedule.
///
/// One micro_step evaluates every node once in topological order of the
/// delay-free subgraph (ties broken by node id), reading pre-step values
/// through delayed edges; it then atomically commits new delayed values and
/// rotates every coefficient cycle. Construction fails loudly on a
/// delay-free cycle.
///
/// A Circuit instance is single-owner mutable state; distinct instances
/// share nothing and may run on distinct threads.
class Circuit {
  public:
    NodeId add_sum(std::string name, int width, std::vector<double> bias = {});
    NodeId add_product(std::string name, int width);
    NodeId add_constant(std::string name, std::vector<double> value);
    NodeId add_input(std::string name, int width);
    NodeId add_output(std::string name, int width);
    NodeId add_subgraph(std::string name, SubgraphRef sub);
    NodeId add_slot(std::string name, int lanes, int lane_width);
    NodeId add_route(std::string name, int lanes, int lane_width);
    void add_edge(NodeId src, NodeId dst, double weight = 1.0, bool delayed = false);

    /// Binds a cycle to a node: a Constant takes one cycle that drives its
    /// value; Slot and Route nodes take one cycle per lane in bind order.
    int bind_cycle(NodeId node, CoefficientCycle cycle);

    /// Initial value delivered by delayed edges out of `node` (and the
    /// initial lane contents of a Slot) before its first commit.
    void set_delay_init(NodeId node, std::vector<double> value);

    /// Validates the graph, computes the schedule, puts the circuit in its
    /// initial state. Throws std::invalid_argument on a delay-free cycle or
    /// an inconsistent node/edge description.
    void finalize();

    // Tableau hot-swap support: the node graph stays untouched, only cycle
    // arrays and lane counts are rebuilt. State is re-initialized.
    void replace_node_cycles(NodeId node, std::vector<CoefficientCycle> cycles);
    void resize_lanes(NodeId slot, NodeId route, int lanes);
    void revalidate() const;

    void reset();
    void feed_input(NodeId node, std::vector<double> value);
    void micro_step();
    const std::vector<double>& read_node(NodeId node) const;
    std::uint64_t micro_iteration() const { return micro_iteration_; }

    std::size_t node_count() const { return nodes_.size(); }
    const Node& node(NodeId id) const;
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<NodeId>& schedule() const { return schedule_; }
    std::vector<NodeId> delayed_sources() const;
    std::vector<const CoefficientCycle*> cycles_of(NodeId node) const;
    std::size_t cycle_count() const { return cycles_.size(); }
    std::map<NodeKind, int> census() const;
    bool finalized() const { return finalized_; }

    /// Per-micro-step trace rows `micro,node,name,kind,values` (values
    /// ';'-joined) written after each node evaluation. Pass nullptr to
    /// disable.
    void set_trace(std::ostream* sink) { trace_ = sink; }

    /// Evaluates a delay-free, all-scalar circuit: inputs[k] feeds
    /// input_ids[k], outputs[k] receives the value of output_ids[k].
    /// Does not touch circuit state; scratch is caller-owned.
    void eval_combinational(std::span<const double> inputs, std::span<const NodeId> input_ids,
                            std::span<const NodeId> output_ids, std::span<double> outputs,
                            std::vector<double>& scratch) const;

  private:
    struct BoundCycle {
        NodeId node = -1;
        CoefficientCycle cycle;
    };

    NodeId add_node(Node node);
    void compute_schedule();
    void eval_node(NodeId id);
    void check_widths() const;
    const std::vector<double>& edge_value(const Edge& e) const;

    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> in_edges_;  // per dst, insertion order
    std::vector<BoundCycle> cycles_;
    std::vector<std::vector<int>> node_cycles_;  // per node, bind order
    std::vector<std::vector<double>> delay_init_;
    std::vector<NodeId> schedule_;
    std::vector<NodeId> delayed_sources_;

    // run state
    std::vector<std::vector<double>> values_;
    std::vector<std::vector<double>> delay_state_;
    std::vector<std::vector<double>> slot_prev_;
    std::vector<char> input_fed_;
    mutable std::vector<std::vector<double>> sub_scratch_;
    std::uint64_t micro_iteration_ = 0;
    bool finalized_ = false;
    std::ostream* trace_ = nullptr;
};

/// Graphviz rendering: delay edges dashed, cycle-bound nodes annotated with
/// their arrays and positions.
std::string to_dot(const Circuit& circuit);

}  // namespace polyint
