#include "fuselab/graph.hpp"

#include "fuselab/errors.hpp"

namespace fuselab {

Var Graph::constant(Tensor value) {
    nodes_.push_back(Node{"constant", {}, std::move(value), nullptr, false, {}});
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::variable(Tensor value, bool requires_grad) {
    value.set_requires_grad(requires_grad);
    nodes_.push_back(Node{"variable", {}, std::move(value), nullptr, requires_grad, {}});
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::param(const Tensor& tensor) {
    nodes_.push_back(Node{"param", {}, Tensor{}, &tensor, tensor.requires_grad(), {}});
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Graph::value(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return n.bound ? *n.bound : n.value;
}

const Tensor& Graph::value(Var v) const {
    if (v.graph != this || v.id >= nodes_.size()) throw ContractError("variable does not belong to this graph");
    return value(v.id);
}

std::span<const double> Graph::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.bound ? n.bound->grad() : n.value.grad();
}

Var Graph::record(std::string_view op, Tensor value, std::vector<std::uint32_t> inputs, BackwardFn backward) {
    if (!value.all_finite())
        throw NumericError(std::string(op) + " produced a non-finite value");
    bool needs = false;
    for (auto id : inputs) needs = needs || nodes_[id].requires_grad;
    nodes_.push_back(Node{op, std::move(inputs), std::move(value), nullptr, needs, needs ? std::move(backward) : BackwardFn{}});
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

std::span<double> Graph::input_grad(std::uint32_t id) {
    if (!nodes_[id].requires_grad) return {};
    auto& adj = adjoints_[id];
    if (adj.empty()) adj.assign(value(id).numel(), 0.0);
    return adj;
}

void Graph::backward(Var loss) {
    if (loss.graph != this) throw ContractError("loss does not belong to this graph");
    if (value(loss).numel() != 1)
        throw ContractError("backward requires a scalar loss, got shape " + shape_string(value(loss).shape()));
    adjoints_.assign(loss.id + 1, {});
    if (!nodes_[loss.id].requires_grad) return;
    adjoints_[loss.id] = {1.0};
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        auto& adj = adjoints_[i];
        if (adj.empty()) continue;
        Node& n = nodes_[i];
        if (n.inputs.empty()) {
            if (n.bound)
                n.bound->accumulate_grad(adj);
            else
                n.value.accumulate_grad(adj);
        } else if (n.backward) {
            n.backward(*this, adj);
        }
        std::vector<double>().swap(adj);
    }
    adjoints_.clear();
}

}  // namespace fuselab
