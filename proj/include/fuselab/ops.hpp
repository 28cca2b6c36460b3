#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fuselab/graph.hpp"

namespace fuselab {

// Inputs below this value are clamped by log(); non-positive inputs are a domain error.
inline constexpr double kLogEpsilon = 1e-12;

// Elementwise. Shapes must match, except that either side may be a single
// element which is then broadcast.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

Var scale(Var a, double factor);
Var shift(Var a, double offset);
Var neg(Var a);
// 1 - a
Var one_minus(Var a);

Var matmul(Var a, Var b);
// x [B, in] times W^T with W [out, in], plus b [out].
Var linear(Var x, Var weight, Var bias);
// x [B, n] plus row vector b [n] added to every row.
Var add_row(Var x, Var row);
// Row r of x [B, n] multiplied by c[r], c of shape [B, 1].
Var mul_column(Var x, Var column);

Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var reshape(Var a, Shape shape);
// Rows of x [N, ...] selected by index; repeats allowed.
Var gather_rows(Var x, std::span<const std::size_t> rows);

Var sum(Var a);
Var mean(Var a);
Var squared_norm(Var a);

Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var clamp(Var a, double lo, double hi);
// Row-wise over the last axis, max-subtracted.
Var softmax(Var a);

// Valid 2-D convolution, stride 1: x [B, H, W, Cin], kernel [kh, kw, Cin, Cout], bias [Cout].
Var conv2d(Var x, Var kernel, Var bias);
// Max over a cells x cells partition of the spatial axes: [B, H, W, C] -> [B, cells, cells, C].
Var adaptive_max_pool(Var x, std::size_t cells);

// Same value, no gradient flow.
Var detach(Var a);

}  // namespace fuselab
