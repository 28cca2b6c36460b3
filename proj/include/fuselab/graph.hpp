#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "fuselab/tensor.hpp"

namespace fuselab {

class Graph;

/// Handle to a node of a Graph.
struct Var {
    Graph* graph = nullptr;
    std::uint32_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t numel() const { return value().numel(); }
    std::size_t dim(std::size_t axis) const { return value().dim(axis); }
    double item() const { return value().item(); }
};

/// Tape of operations for reverse-mode differentiation.
///
/// Nodes are appended in execution order, so the tape is always a valid
/// topological order and backward walks it in reverse. A graph is single
/// threaded; separate graphs may be used from separate threads.
///
/// Leaves come in three kinds: constants (never differentiated), owned
/// variables (gradient stored on the node's tensor) and bound parameters
/// (gradient accumulated into the caller's tensor). Repeated backward calls
/// accumulate into leaf gradients; call zero_grad on the leaves to reset.
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, std::span<const double>)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Tensor value);
    Var variable(Tensor value, bool requires_grad = true);
    // Binds an external tensor. It must outlive the graph. Differentiated only
    // when tensor.requires_grad() is set at bind time.
    Var param(const Tensor& tensor);

    const Tensor& value(Var v) const;
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    std::string_view op(Var v) const { return nodes_.at(v.id).op; }
    std::span<const std::uint32_t> inputs(Var v) const { return nodes_.at(v.id).inputs; }
    // Gradient of an owned variable after backward.
    std::span<const double> grad(Var v) const;

    std::size_t size() const noexcept { return nodes_.size(); }

    void backward(Var loss);

    // Used by op implementations.
    Var record(std::string_view op, Tensor value, std::vector<std::uint32_t> inputs, BackwardFn backward);
    // Adjoint buffer of an input during backward; empty when the input does
    // not require a gradient.
    std::span<double> input_grad(std::uint32_t id);
    const Tensor& value(std::uint32_t id) const;

private:
    struct Node {
        std::string_view op;
        std::vector<std::uint32_t> inputs;
        Tensor value;
        const Tensor* bound = nullptr;
        bool requires_grad = false;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> adjoints_;
};

inline const Tensor& Var::value() const { return graph->value(*this); }

}  // namespace fuselab
