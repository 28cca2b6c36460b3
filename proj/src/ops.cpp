#include "fuselab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fuselab/errors.hpp"

namespace fuselab {

namespace {

Graph& graph_of(Var a) {
    if (!a.graph) throw ContractError("variable is not attached to a graph");
    return *a.graph;
}

void same_graph(Var a, Var b) {
    if (a.graph != b.graph) throw ContractError("variables belong to different graphs");
}

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a) + " and " + shape_string(b) +
                         " do not conform");
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
    if (t.rank() != rank)
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                             shape_string(t.shape()));
}

enum class Broadcast { none, left_scalar, right_scalar };

Broadcast broadcast_mode(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Broadcast::none;
    if (a.numel() == 1) return Broadcast::left_scalar;
    if (b.numel() == 1) return Broadcast::right_scalar;
    mismatch(op, a.shape(), b.shape());
}

// Elementwise binary op with scalar broadcast. dfa/dfb give partials at (x, y).
template <class F, class DA, class DB>
Var binary(const char* name, Var a, Var b, F f, DA dfa, DB dfb) {
    same_graph(a, b);
    Graph& g = graph_of(a);
    const Tensor& ta = a.value();
    const Tensor& tb = b.value();
    const Broadcast mode = broadcast_mode(name, ta, tb);
    const Tensor& big = mode == Broadcast::left_scalar ? tb : ta;
    Tensor out(big.shape());
    const std::size_t n = out.numel();
    auto xa = [&, mode](std::size_t i) { return mode == Broadcast::left_scalar ? ta[0] : ta[i]; };
    auto xb = [&, mode](std::size_t i) { return mode == Broadcast::right_scalar ? tb[0] : tb[i]; };
    for (std::size_t i = 0; i < n; ++i) out[i] = f(xa(i), xb(i));
    const auto ia = a.id, ib = b.id;
    return g.record(name, std::move(out), {ia, ib}, [ia, ib, mode, dfa, dfb](Graph& g, std::span<const double> go) {
        const Tensor& ta = g.value(ia);
        const Tensor& tb = g.value(ib);
        auto ga = g.input_grad(ia);
        auto gb = g.input_grad(ib);
        for (std::size_t i = 0; i < go.size(); ++i) {
            const double x = mode == Broadcast::left_scalar ? ta[0] : ta[i];
            const double y = mode == Broadcast::right_scalar ? tb[0] : tb[i];
            if (!ga.empty()) ga[mode == Broadcast::left_scalar ? 0 : i] += go[i] * dfa(x, y);
            if (!gb.empty()) gb[mode == Broadcast::right_scalar ? 0 : i] += go[i] * dfb(x, y);
        }
    });
}

// Elementwise unary op; df receives (input, output).
template <class F, class D>
Var unary(const char* name, Var a, F f, D df) {
    Graph& g = graph_of(a);
    const Tensor& ta = a.value();
    Tensor out(ta.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(ta[i]);
    const auto ia = a.id;
    const auto self = static_cast<std::uint32_t>(g.size());
    return g.record(name, std::move(out), {ia}, [ia, self, df](Graph& g, std::span<const double> go) {
        auto ga = g.input_grad(ia);
        if (ga.empty()) return;
        const Tensor& x = g.value(ia);
        const Tensor& y = g.value(self);
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * df(x[i], y[i]);
    });
}

void add_into(std::span<double> dst, std::span<const double> src) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

// outer/inner decomposition around an axis.
struct AxisSplit {
    std::size_t outer = 1, length = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
    AxisSplit r;
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    r.length = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

}  // namespace

Var add(Var a, Var b) {
    return binary("add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
                  [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
    return binary("sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
                  [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
    return binary("mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
                  [](double x, double) { return x; });
}

Var div(Var a, Var b) {
    for (double v : b.value().data())
        if (v == 0.0) throw DomainError("div: division by zero");
    return binary("div", a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
                  [](double x, double y) { return -x / (y * y); });
}

Var scale(Var a, double factor) {
    return unary("scale", a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var shift(Var a, double offset) {
    return unary("shift", a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var one_minus(Var a) {
    return unary("one_minus", a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var matmul(Var a, Var b) {
    same_graph(a, b);
    Graph& g = graph_of(a);
    const Tensor& ta = a.value();
    const Tensor& tb = b.value();
    require_rank("matmul", ta, 2);
    require_rank("matmul", tb, 2);
    const std::size_t m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
    if (tb.dim(0) != k) mismatch("matmul", ta.shape(), tb.shape());
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double x = ta[i * k + p];
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += x * tb[p * n + j];
        }
    const auto ia = a.id, ib = b.id;
    return g.record("matmul", std::move(out), {ia, ib}, [ia, ib, m, k, n](Graph& g, std::span<const double> go) {
        const Tensor& ta = g.value(ia);
        const Tensor& tb = g.value(ib);
        if (auto ga = g.input_grad(ia); !ga.empty())
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += go[i * n + j] * tb[p * n + j];
                    ga[i * k + p] += s;
                }
        if (auto gb = g.input_grad(ib); !gb.empty())
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double x = ta[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += x * go[i * n + j];
                }
    });
}

Var linear(Var x, Var weight, Var bias) {
    same_graph(x, weight);
    same_graph(x, bias);
    Graph& g = graph_of(x);
    const Tensor& tx = x.value();
    const Tensor& tw = weight.value();
    const Tensor& tb = bias.value();
    require_rank("linear", tx, 2);
    require_rank("linear", tw, 2);
    const std::size_t rows = tx.dim(0), in = tx.dim(1), out_dim = tw.dim(0);
    if (tw.dim(1) != in) mismatch("linear", tx.shape(), tw.shape());
    if (tb.numel() != out_dim) mismatch("linear", tw.shape(), tb.shape());
    Tensor out({rows, out_dim});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out_dim; ++o) {
            double s = tb[o];
            for (std::size_t i = 0; i < in; ++i) s += tx[r * in + i] * tw[o * in + i];
            out[r * out_dim + o] = s;
        }
    const auto ix = x.id, iw = weight.id, ib = bias.id;
    return g.record("linear", std::move(out), {ix, iw, ib},
                    [ix, iw, ib, rows, in, out_dim](Graph& g, std::span<const double> go) {
                        const Tensor& tx = g.value(ix);
                        const Tensor& tw = g.value(iw);
                        if (auto gx = g.input_grad(ix); !gx.empty())
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t o = 0; o < out_dim; ++o) {
                                    const double d = go[r * out_dim + o];
                                    for (std::size_t i = 0; i < in; ++i) gx[r * in + i] += d * tw[o * in + i];
                                }
                        if (auto gw = g.input_grad(iw); !gw.empty())
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t o = 0; o < out_dim; ++o) {
                                    const double d = go[r * out_dim + o];
                                    for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += d * tx[r * in + i];
                                }
                        if (auto gb = g.input_grad(ib); !gb.empty())
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t o = 0; o < out_dim; ++o) gb[o] += go[r * out_dim + o];
                    });
}

Var add_row(Var x, Var row) {
    same_graph(x, row);
    Graph& g = graph_of(x);
    const Tensor& tx = x.value();
    const Tensor& tr = row.value();
    require_rank("add_row", tx, 2);
    const std::size_t rows = tx.dim(0), cols = tx.dim(1);
    if (tr.numel() != cols) mismatch("add_row", tx.shape(), tr.shape());
    Tensor out = tx;
    out.set_requires_grad(false);
    out.clear_grad();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += tr[c];
    const auto ix = x.id, ir = row.id;
    return g.record("add_row", std::move(out), {ix, ir}, [ix, ir, rows, cols](Graph& g, std::span<const double> go) {
        if (auto gx = g.input_grad(ix); !gx.empty()) add_into(gx, go);
        if (auto gr = g.input_grad(ir); !gr.empty())
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) gr[c] += go[r * cols + c];
    });
}

Var mul_column(Var x, Var column) {
    same_graph(x, column);
    Graph& g = graph_of(x);
    const Tensor& tx = x.value();
    const Tensor& tc = column.value();
    require_rank("mul_column", tx, 2);
    const std::size_t rows = tx.dim(0), cols = tx.dim(1);
    if (tc.numel() != rows) mismatch("mul_column", tx.shape(), tc.shape());
    Tensor out({rows, cols});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = tx[r * cols + c] * tc[r];
    const auto ix = x.id, ic = column.id;
    return g.record("mul_column", std::move(out), {ix, ic}, [ix, ic, rows, cols](Graph& g, std::span<const double> go) {
        const Tensor& tx = g.value(ix);
        const Tensor& tc = g.value(ic);
        if (auto gx = g.input_grad(ix); !gx.empty())
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += go[r * cols + c] * tc[r];
        if (auto gc = g.input_grad(ic); !gc.empty())
            for (std::size_t r = 0; r < rows; ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < cols; ++c) s += go[r * cols + c] * tx[r * cols + c];
                gc[r] += s;
            }
    });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat of zero tensors");
    Graph& g = graph_of(parts[0]);
    const Shape& first = parts[0].shape();
    if (axis >= first.size()) throw DimensionError("concat: axis out of range for shape " + shape_string(first));
    Shape shape = first;
    shape[axis] = 0;
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> lengths;
    for (const Var& p : parts) {
        same_graph(parts[0], p);
        const Shape& s = p.shape();
        if (s.size() != first.size()) mismatch("concat", first, s);
        for (std::size_t i = 0; i < s.size(); ++i)
            if (i != axis && s[i] != first[i]) mismatch("concat", first, s);
        shape[axis] += s[axis];
        ids.push_back(p.id);
        lengths.push_back(s[axis]);
    }
    const AxisSplit sp = split_axis(shape, axis);
    Tensor out(shape);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& t = parts[k].value();
        const std::size_t len = lengths[k];
        for (std::size_t o = 0; o < sp.outer; ++o)
            std::copy_n(t.data().begin() + o * len * sp.inner, len * sp.inner,
                        out.data().begin() + (o * sp.length + offset) * sp.inner);
        offset += len;
    }
    return g.record("concat", std::move(out), ids, [ids, lengths, sp](Graph& g, std::span<const double> go) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const std::size_t len = lengths[k];
            if (auto gk = g.input_grad(ids[k]); !gk.empty())
                for (std::size_t o = 0; o < sp.outer; ++o)
                    for (std::size_t i = 0; i < len * sp.inner; ++i)
                        gk[o * len * sp.inner + i] += go[(o * sp.length + offset) * sp.inner + i];
            offset += len;
        }
    });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
    return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
    Graph& g = graph_of(a);
    const Tensor& ta = a.value();
    if (axis >= ta.rank()) throw DimensionError("slice: axis out of range for shape " + shape_string(ta.shape()));
    if (begin >= end || end > ta.dim(axis))
        throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") invalid for shape " + shape_string(ta.shape()));
    const AxisSplit sp = split_axis(ta.shape(), axis);
    Shape shape = ta.shape();
    shape[axis] = end - begin;
    const std::size_t len = end - begin;
    Tensor out(shape);
    for (std::size_t o = 0; o < sp.outer; ++o)
        std::copy_n(ta.data().begin() + (o * sp.length + begin) * sp.inner, len * sp.inner,
                    out.data().begin() + o * len * sp.inner);
    const auto ia = a.id;
    return g.record("slice", std::move(out), {ia}, [ia, sp, begin, len](Graph& g, std::span<const double> go) {
        auto ga = g.input_grad(ia);
        if (ga.empty()) return;
        for (std::size_t o = 0; o < sp.outer; ++o)
            for (std::size_t i = 0; i < len * sp.inner; ++i)
                ga[(o * sp.length + begin) * sp.inner + i] += go[o * len * sp.inner + i];
    });
}

Var reshape(Var a, Shape shape) {
    Graph& g = graph_of(a);
    Tensor out = a.value().reshaped(std::move(shape));
    const auto ia = a.id;
    return g.record("reshape", std::move(out), {ia}, [ia](Graph& g, std::span<const double> go) {
        if (auto ga = g.input_grad(ia); !ga.empty()) add_into(ga, go);
    });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
    Graph& g = graph_of(x);
    const Tensor& tx = x.value();
    if (rows.empty()) throw ContractError("gather_rows with no rows");
    const std::size_t n = tx.dim(0);
    const std::size_t width = tx.numel() / n;
    Shape shape = tx.shape();
    shape[0] = rows.size();
    Tensor out(shape);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= n)
            throw DimensionError("gather_rows: row " + std::to_string(rows[r]) + " out of range for shape " +
                                 shape_string(tx.shape()));
        std::copy_n(tx.data().begin() + rows[r] * width, width, out.data().begin() + r * width);
    }
    const auto ix = x.id;
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    return g.record("gather_rows", std::move(out), {ix}, [ix, idx = std::move(idx), width](Graph& g, std::span<const double> go) {
        auto gx = g.input_grad(ix);
        if (gx.empty()) return;
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < width; ++c) gx[idx[r] * width + c] += go[r * width + c];
    });
}

Var sum(Var a) {
    Graph& g = graph_of(a);
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    const auto ia = a.id;
    return g.record("sum", Tensor::scalar(s), {ia}, [ia](Graph& g, std::span<const double> go) {
        auto ga = g.input_grad(ia);
        for (double& v : ga) v += go[0];
    });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.numel());
    return scale(sum(a), 1.0 / n);
}

Var squared_norm(Var a) {
    Graph& g = graph_of(a);
    double s = 0.0;
    for (double v : a.value().data()) s += v * v;
    const auto ia = a.id;
    return g.record("squared_norm", Tensor::scalar(s), {ia}, [ia](Graph& g, std::span<const double> go) {
        auto ga = g.input_grad(ia);
        if (ga.empty()) return;
        const Tensor& x = g.value(ia);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * x[i] * go[0];
    });
}

Var exp(Var a) {
    return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
    for (double v : a.value().data())
        if (!(v > 0.0)) throw DomainError("log: non-positive argument " + std::to_string(v));
    return unary(
        "log", a, [](double x) { return std::log(std::max(x, kLogEpsilon)); },
        [](double x, double) { return x < kLogEpsilon ? 0.0 : 1.0 / x; });
}

Var tanh(Var a) {
    return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
    return unary(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
    return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var clamp(Var a, double lo, double hi) {
    if (!(lo <= hi)) throw ContractError("clamp: empty interval");
    return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
                 [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var softmax(Var a) {
    Graph& g = graph_of(a);
    const Tensor& ta = a.value();
    const std::size_t cols = ta.shape().back();
    const std::size_t rows = ta.numel() / cols;
    Tensor out(ta.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = ta.data().data() + r * cols;
        double* y = out.data().data() + r * cols;
        const double m = *std::max_element(x, x + cols);
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) z += (y[c] = std::exp(x[c] - m));
        for (std::size_t c = 0; c < cols; ++c) y[c] /= z;
    }
    const auto ia = a.id;
    const auto self = static_cast<std::uint32_t>(g.size());
    return g.record("softmax", std::move(out), {ia}, [ia, self, rows, cols](Graph& g, std::span<const double> go) {
        auto ga = g.input_grad(ia);
        if (ga.empty()) return;
        const Tensor& y = g.value(self);
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += go[r * cols + c] * y[r * cols + c];
            for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += y[r * cols + c] * (go[r * cols + c] - dot);
        }
    });
}

Var conv2d(Var x, Var kernel, Var bias) {
    same_graph(x, kernel);
    same_graph(x, bias);
    Graph& g = graph_of(x);
    const Tensor& tx = x.value();
    const Tensor& tk = kernel.value();
    const Tensor& tb = bias.value();
    require_rank("conv2d", tx, 4);
    require_rank("conv2d", tk, 4);
    const std::size_t batch = tx.dim(0), h = tx.dim(1), w = tx.dim(2), ci = tx.dim(3);
    const std::size_t kh = tk.dim(0), kw = tk.dim(1), co = tk.dim(3);
    if (tk.dim(2) != ci) mismatch("conv2d", tx.shape(), tk.shape());
    if (tb.numel() != co) mismatch("conv2d", tk.shape(), tb.shape());
    if (h < kh || w < kw)
        throw DimensionError("conv2d: input " + shape_string(tx.shape()) + " smaller than kernel " +
                             shape_string(tk.shape()));
    const std::size_t oh = h - kh + 1, ow = w - kw + 1;
    Tensor out({batch, oh, ow, co});
    auto xi = [=](std::size_t b, std::size_t y, std::size_t xx, std::size_t c) { return ((b * h + y) * w + xx) * ci + c; };
    auto ki = [=](std::size_t y, std::size_t xx, std::size_t c, std::size_t o) { return ((y * kw + xx) * ci + c) * co + o; };
    auto oi = [=](std::size_t b, std::size_t y, std::size_t xx) { return ((b * oh + y) * ow + xx) * co; };
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx) {
                double* dst = out.data().data() + oi(b, y, xx);
                for (std::size_t o = 0; o < co; ++o) dst[o] = tb[o];
                for (std::size_t dy = 0; dy < kh; ++dy)
                    for (std::size_t dx = 0; dx < kw; ++dx)
                        for (std::size_t c = 0; c < ci; ++c) {
                            const double v = tx[xi(b, y + dy, xx + dx, c)];
                            const double* kr = tk.data().data() + ki(dy, dx, c, 0);
                            for (std::size_t o = 0; o < co; ++o) dst[o] += v * kr[o];
                        }
            }
    const auto ix = x.id, ik = kernel.id, ib = bias.id;
    return g.record("conv2d", std::move(out), {ix, ik, ib},
                    [=](Graph& g, std::span<const double> go) {
                        const Tensor& tx = g.value(ix);
                        const Tensor& tk = g.value(ik);
                        auto gx = g.input_grad(ix);
                        auto gk = g.input_grad(ik);
                        auto gb = g.input_grad(ib);
                        for (std::size_t b = 0; b < batch; ++b)
                            for (std::size_t y = 0; y < oh; ++y)
                                for (std::size_t xx = 0; xx < ow; ++xx) {
                                    const double* d = go.data() + oi(b, y, xx);
                                    if (!gb.empty())
                                        for (std::size_t o = 0; o < co; ++o) gb[o] += d[o];
                                    for (std::size_t dy = 0; dy < kh; ++dy)
                                        for (std::size_t dx = 0; dx < kw; ++dx)
                                            for (std::size_t c = 0; c < ci; ++c) {
                                                const std::size_t xidx = xi(b, y + dy, xx + dx, c);
                                                const std::size_t kidx = ki(dy, dx, c, 0);
                                                if (!gx.empty()) {
                                                    double s = 0.0;
                                                    for (std::size_t o = 0; o < co; ++o) s += d[o] * tk[kidx + o];
                                                    gx[xidx] += s;
                                                }
                                                if (!gk.empty()) {
                                                    const double v = tx[xidx];
                                                    for (std::size_t o = 0; o < co; ++o) gk[kidx + o] += d[o] * v;
                                                }
                                            }
                                }
                    });
}

Var adaptive_max_pool(Var x, std::size_t cells) {
    Graph& g = graph_of(x);
    const Tensor& tx = x.value();
    require_rank("adaptive_max_pool", tx, 4);
    const std::size_t batch = tx.dim(0), h = tx.dim(1), w = tx.dim(2), c = tx.dim(3);
    if (cells == 0 || h < cells || w < cells)
        throw DimensionError("adaptive_max_pool: input " + shape_string(tx.shape()) + " smaller than " +
                             std::to_string(cells) + "x" + std::to_string(cells) + " cells");
    Tensor out({batch, cells, cells, c});
    std::vector<std::size_t> argmax(out.numel());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t cy = 0; cy < cells; ++cy)
            for (std::size_t cx = 0; cx < cells; ++cx) {
                const std::size_t y0 = cy * h / cells, y1 = ((cy + 1) * h + cells - 1) / cells;
                const std::size_t x0 = cx * w / cells, x1 = ((cx + 1) * w + cells - 1) / cells;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t at = 0;
                    for (std::size_t y = y0; y < y1; ++y)
                        for (std::size_t xx = x0; xx < x1; ++xx) {
                            const std::size_t idx = ((b * h + y) * w + xx) * c + ch;
                            if (tx[idx] > best) {
                                best = tx[idx];
                                at = idx;
                            }
                        }
                    const std::size_t o = ((b * cells + cy) * cells + cx) * c + ch;
                    out[o] = best;
                    argmax[o] = at;
                }
            }
    const auto ix = x.id;
    return g.record("adaptive_max_pool", std::move(out), {ix},
                    [ix, argmax = std::move(argmax)](Graph& g, std::span<const double> go) {
                        auto gx = g.input_grad(ix);
                        if (gx.empty()) return;
                        for (std::size_t o = 0; o < go.size(); ++o) gx[argmax[o]] += go[o];
                    });
}

Var detach(Var a) { return graph_of(a).constant(a.value()); }

}  // namespace fuselab
