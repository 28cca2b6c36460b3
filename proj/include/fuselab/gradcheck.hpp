#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "fuselab/graph.hpp"

namespace fuselab {

struct CheckReport {
    // max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|)
    double max_rel_err = 0.0;
    std::size_t worst_coordinate = 0;
    std::size_t coordinates = 0;
    bool pass = true;
};

// Scalar function of one input tensor.
using TensorFn = std::function<Var(Graph&, Var)>;
// Scalar function of externally bound parameters.
using ParamFn = std::function<Var(Graph&)>;

/// Compares the reverse-mode gradient of f at point with central differences
/// of step h. Throws EvaluationError naming the coordinate when f is not
/// finite at a probe point.
CheckReport grad_check(const TensorFn& f, const Tensor& point, double h = 1e-5, double tol = 1e-4);

/// Same check over every entry of every parameter tensor. f must be
/// deterministic: it is re-evaluated with each entry perturbed in place.
/// Parameter gradients are reset and requires_grad is switched on.
CheckReport grad_check_params(const ParamFn& f, std::span<Tensor* const> params, double h = 1e-5,
                              double tol = 1e-4);

}  // namespace fuselab
