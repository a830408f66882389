#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "dbr/nncore/tensor.hpp"

namespace dbr::nn {

/// A trainable tensor with its accumulated gradient and a learning-rate multiplier.
struct Parameter {
    Parameter() = default;
    Parameter(std::string name, Tensor value, double lr_multiplier = 1.0);

    std::string name;
    Tensor value;
    Tensor grad;
    double lr_multiplier = 1.0;

    void zero_grad() { grad.fill(0.0); }
};

class Graph;

/// Handle to a node recorded on a Graph.
class Var {
public:
    Var() = default;

    Graph& graph() const;
    std::size_t id() const noexcept { return id_; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool valid() const noexcept { return graph_ != nullptr; }

private:
    friend class Graph;
    Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
};

/// View handed to an op's backward function.
class BackwardContext {
public:
    const Tensor& out_value() const;
    const Tensor& out_grad() const;
    std::size_t input_count() const;
    const Tensor& in_value(std::size_t i) const;
    /// Gradient buffer of input i, or nullptr when that input does not need one.
    Tensor* in_grad(std::size_t i);

private:
    friend class Graph;
    BackwardContext(Graph& g, std::size_t node) : graph_(g), node_(node) {}

    Graph& graph_;
    std::size_t node_;
};

using BackwardFn = std::function<void(BackwardContext&)>;

/// Tape for reverse-mode differentiation. Nodes are recorded in evaluation
/// order, so reverse creation order is a valid topological order.
class Graph {
public:
    Graph() = default;
    /// With tracking off every node is treated as a constant (inference mode).
    explicit Graph(bool track_gradients) : tracking_(track_gradients) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// A value that never receives a gradient.
    Var constant(Tensor value);
    /// A free leaf whose gradient is readable through grad() after backward().
    Var leaf(Tensor value);
    /// A leaf bound to a Parameter; backward() adds into parameter.grad. The
    /// parameter must outlive the graph and stay unmodified while it is in use.
    Var param(Parameter& parameter);

    /// Records an op output. `backward` may be empty for non-differentiable outputs.
    Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

    const Tensor& value(Var v) const;
    /// Gradient of the last backward() loss w.r.t. v (zeros when v did not feed it).
    const Tensor& grad(Var v) const;
    bool requires_grad(Var v) const;

    /// Propagates d(loss)/d(node) for every node reachable from the scalar `loss`.
    void backward(Var loss);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    friend class Var;
    friend class BackwardContext;

    struct Node {
        // Parameter nodes alias parameter->value instead of copying it.
        const Tensor& current() const { return parameter ? parameter->value : value; }

        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        Parameter* parameter = nullptr;
        bool requires_grad = false;
    };

    const Node& node(Var v) const;
    Tensor& grad_buffer(std::size_t id);

    std::deque<Node> nodes_;
    bool has_backward_ = false;
    bool tracking_ = true;
};

}  // namespace dbr::nn
