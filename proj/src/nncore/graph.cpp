#include "dbr/nncore/graph.hpp"

#include "dbr/errors.hpp"

namespace dbr::nn {

Parameter::Parameter(std::string name_, Tensor value_, double lr_multiplier_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.shape(), 0.0), lr_multiplier(lr_multiplier_) {
    if (lr_multiplier < 0.0) throw ValidationError("lr_multiplier must be nonnegative for " + name);
}

Graph& Var::graph() const {
    if (!graph_) throw StateError("use of an unbound Var");
    return *graph_;
}

const Tensor& Var::value() const { return graph().value(*this); }

const Tensor& BackwardContext::out_value() const { return graph_.nodes_[node_].current(); }
const Tensor& BackwardContext::out_grad() const { return graph_.nodes_[node_].grad; }
std::size_t BackwardContext::input_count() const { return graph_.nodes_[node_].inputs.size(); }

const Tensor& BackwardContext::in_value(std::size_t i) const {
    return graph_.nodes_[graph_.nodes_[node_].inputs.at(i)].current();
}

Tensor* BackwardContext::in_grad(std::size_t i) {
    const auto id = graph_.nodes_[node_].inputs.at(i);
    if (!graph_.nodes_[id].requires_grad) return nullptr;
    return &graph_.grad_buffer(id);
}

Var Graph::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false});
    return Var(this, nodes_.size() - 1);
}

Var Graph::leaf(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, tracking_});
    return Var(this, nodes_.size() - 1);
}

Var Graph::param(Parameter& parameter) {
    if (parameter.grad.shape() != parameter.value.shape()) {
        throw DimensionError("parameter " + parameter.name + " has mismatched grad shape");
    }
    nodes_.push_back(Node{Tensor(), {}, {}, {}, &parameter, tracking_});
    return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    for (const auto& in : inputs) {
        if (in.graph_ != this) throw StateError("op input belongs to a different graph");
        n.inputs.push_back(in.id_);
        n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
    }
    if (n.requires_grad && backward) {
        n.backward = std::move(backward);
    } else {
        n.requires_grad = false;
    }
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

const Graph::Node& Graph::node(Var v) const {
    if (v.graph_ != this || v.id_ >= nodes_.size()) throw StateError("Var does not belong to this graph");
    return nodes_[v.id_];
}

const Tensor& Graph::value(Var v) const { return node(v).current(); }

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor& Graph::grad_buffer(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.shape() != n.current().shape()) n.grad = Tensor(n.current().shape(), 0.0);
    return n.grad;
}

const Tensor& Graph::grad(Var v) const {
    const auto& n = node(v);
    if (!has_backward_) throw StateError("grad() requested before backward()");
    if (n.grad.shape() != n.current().shape()) {
        // Not reached by the last backward pass: materialize zeros.
        auto& mutable_node = const_cast<Node&>(n);
        mutable_node.grad = Tensor(n.current().shape(), 0.0);
    }
    return n.grad;
}

void Graph::backward(Var loss) {
    if (nodes_.empty()) throw StateError("backward() called before any forward op was recorded");
    const auto& loss_node = node(loss);
    if (loss_node.current().size() != 1) {
        throw DimensionError("backward() needs a scalar loss, got " + shape_string(loss_node.current().shape()));
    }
    for (auto& n : nodes_) n.grad = Tensor();
    has_backward_ = true;
    if (!loss_node.requires_grad) return;

    grad_buffer(loss.id_)[0] = 1.0;
    for (std::size_t k = loss.id_ + 1; k-- > 0;) {
        auto& n = nodes_[k];
        if (!n.requires_grad || n.grad.empty()) continue;
        if (n.backward) {
            BackwardContext ctx(*this, k);
            n.backward(ctx);
        }
        if (n.parameter) {
            auto& pg = n.parameter->grad;
            for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
        }
    }
}

}  // namespace dbr::nn
