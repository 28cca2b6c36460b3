#include <cmath>
#include <functional>
#include <limits>

#include "fuselab/errors.hpp"
#include "fuselab/gradcheck.hpp"
#include "fuselab/ops.hpp"
#include "fuselab/random.hpp"
#include "support.hpp"

using namespace fuselab;

namespace {

// Central differences computed here, independently of grad_check.
std::vector<double> numeric_gradient(const std::function<double(const Tensor&)>& f, Tensor x, double h = 1e-5) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        out[i] = (fp - fm) / (2 * h);
    }
    return out;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
    Tensor t(std::move(shape));
    fill_uniform(t, lo, hi, rng);
    return t;
}

}  // namespace

TEST(Tensor, ShapeAndDataAgree) {
    Tensor t({2, 3}, 1.5);
    EXPECT_EQ(t.numel(), 6u);
    EXPECT_EQ(t.at(1, 2), 1.5);
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
    EXPECT_THROW(Tensor({0, 2}), DimensionError);
}

TEST(Ops, SoftmaxOfZerosIsUniform) {
    Graph g;
    Var y = softmax(g.constant(Tensor::row({0, 0})));
    EXPECT_EQ(y.value()[0], 0.5);
    EXPECT_EQ(y.value()[1], 0.5);
}

TEST(Ops, ConcatVectors) {
    Graph g;
    Var y = concat({g.constant(Tensor::vector({1, 2})), g.constant(Tensor::vector({3}))}, 0);
    EXPECT_EQ(y.value().values(), (std::vector<double>{1, 2, 3}));
}

TEST(Ops, SquaredNormOfDifference) {
    Graph g;
    Var y = squared_norm(sub(g.constant(Tensor::vector({1, 2, 3})), g.constant(Tensor::vector({1, 1, 1}))));
    EXPECT_EQ(y.item(), 5.0);
}

TEST(Ops, ShapeMismatchNamesBothShapes) {
    Graph g;
    try {
        add(g.constant(Tensor({2, 3})), g.constant(Tensor({3, 2})));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[3, 2]"), std::string::npos) << msg;
    }
    EXPECT_THROW(matmul(g.constant(Tensor({2, 3})), g.constant(Tensor({2, 3}))), DimensionError);
    EXPECT_THROW(concat({g.constant(Tensor({2, 3})), g.constant(Tensor({2, 2}))}, 0), DimensionError);
}

TEST(Ops, OnlyScalarsBroadcast) {
    Graph g;
    EXPECT_NO_THROW(add(g.constant(Tensor({2, 3}, 1.0)), g.constant(Tensor::scalar(2.0))));
    EXPECT_THROW(add(g.constant(Tensor({2, 3})), g.constant(Tensor::vector({1, 2, 3}))), DimensionError);
}

TEST(Ops, DomainErrors) {
    Graph g;
    EXPECT_THROW(log(g.constant(Tensor::vector({1.0, 0.0}))), DomainError);
    EXPECT_THROW(log(g.constant(Tensor::vector({-1.0}))), DomainError);
    EXPECT_THROW(div(g.constant(Tensor::vector({1.0})), g.constant(Tensor::vector({0.0}))), DomainError);
}

TEST(Ops, NonFiniteResultIsAnError) {
    Graph g;
    EXPECT_THROW(exp(g.constant(Tensor::vector({1000.0}))), NumericError);
}

TEST(Ops, SoftmaxIsStableAndNormalized) {
    Rng rng = make_rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Graph g;
        Tensor x = random_tensor({4, 7}, rng, -50, 50);
        x[0] = 800.0;  // would overflow without max subtraction
        const Tensor& y = softmax(g.constant(x)).value();
        for (std::size_t r = 0; r < 4; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < 7; ++c) {
                EXPECT_GE(y.at(r, c), 0.0);
                s += y.at(r, c);
            }
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Backward, IdentityLoss) {
    Graph g;
    Var x = g.variable(Tensor::scalar(4.0));
    g.backward(x);
    EXPECT_EQ(g.grad(x)[0], 1.0);
}

TEST(Backward, SquareAtThree) {
    Graph g;
    Var x = g.variable(Tensor::scalar(3.0));
    g.backward(mul(x, x));
    EXPECT_EQ(g.grad(x)[0], 6.0);
}

TEST(Backward, NonScalarLossIsContractError) {
    Graph g;
    Var x = g.variable(Tensor::vector({1, 2}));
    EXPECT_THROW(g.backward(x), ContractError);
}

TEST(Backward, RepeatedCallsAccumulateUntilZeroed) {
    Tensor w = Tensor::vector({2.0});
    w.set_requires_grad(true);
    for (int i = 0; i < 2; ++i) {
        Graph g;
        g.backward(sum(mul(g.param(w), g.constant(Tensor::vector({3.0})))));
    }
    EXPECT_EQ(w.grad()[0], 6.0);
    w.zero_grad();
    EXPECT_EQ(w.grad()[0], 0.0);
}

TEST(Backward, FrozenTensorIsConstant) {
    Tensor w = Tensor::vector({2.0});
    Graph g;
    Var y = sum(mul(g.param(w), g.param(w)));
    EXPECT_FALSE(g.requires_grad(y));
}

TEST(Backward, TwoLayerNetworkMatchesFiniteDifferences) {
    Rng rng = make_rng(11);
    const Tensor w1 = random_tensor({5, 3}, rng), b1 = random_tensor({5}, rng);
    const Tensor w2 = random_tensor({2, 5}, rng), b2 = random_tensor({2}, rng);
    const Tensor x = random_tensor({4, 3}, rng);
    auto net = [&](Graph& g, Var in) {
        Var h = tanh(linear(in, g.constant(w1), g.constant(b1)));
        return sum(sigmoid(linear(h, g.constant(w2), g.constant(b2))));
    };
    Graph g;
    Var in = g.variable(x);
    g.backward(net(g, in));
    const auto analytic = g.grad(in);
    const auto numeric = numeric_gradient(
        [&](const Tensor& p) {
            Graph g2;
            return net(g2, g2.constant(p)).item();
        },
        x);
    for (std::size_t i = 0; i < numeric.size(); ++i) EXPECT_LT(rel_err(analytic[i], numeric[i]), 1e-4);
}

TEST(Backward, ConcatGradientSplitsExactly) {
    Rng rng = make_rng(5);
    Graph g;
    Var a = g.variable(random_tensor({2, 3}, rng));
    Var b = g.variable(random_tensor({2, 2}, rng));
    const Tensor weights = random_tensor({2, 5}, rng);
    g.backward(sum(mul(concat({a, b}, 1), g.constant(weights))));
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(g.grad(a)[r * 3 + c], weights.at(r, c));
        for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(g.grad(b)[r * 2 + c], weights.at(r, 3 + c));
    }
}

TEST(Backward, RebuiltGraphGivesBitwiseIdenticalGradients) {
    auto run = [] {
        Rng rng = make_rng(42);
        Tensor w = random_tensor({3, 4}, rng);
        const Tensor x = random_tensor({2, 4}, rng);
        w.set_requires_grad(true);
        Graph g;
        g.backward(squared_norm(softmax(tanh(linear(g.constant(x), g.param(w), g.constant(Tensor({3})))))));
        return std::vector<double>(w.grad().begin(), w.grad().end());
    };
    EXPECT_EQ(run(), run());
}

TEST(GradCheck, SquareAtThree) {
    const auto report = grad_check([](Graph&, Var x) { return mul(x, x); }, Tensor::scalar(3.0));
    EXPECT_TRUE(report.pass);
    EXPECT_LT(report.max_rel_err, 1e-8);
}

TEST(GradCheck, ConstantFunction) {
    const auto report =
        grad_check([](Graph& g, Var) { return g.constant(Tensor::scalar(2.0)); }, Tensor::vector({1, 2, 3}));
    EXPECT_TRUE(report.pass);
    EXPECT_EQ(report.max_rel_err, 0.0);
}

TEST(GradCheck, DenseSigmoidSquaredNorm) {
    Rng rng = make_rng(9);
    const Tensor w = random_tensor({3, 4}, rng), b = random_tensor({3}, rng);
    const auto report = grad_check(
        [&](Graph& g, Var x) { return squared_norm(sigmoid(linear(x, g.constant(w), g.constant(b)))); },
        random_tensor({2, 4}, rng));
    EXPECT_TRUE(report.pass) << report.max_rel_err;
}

TEST(GradCheck, NonFiniteProbeNamesCoordinate) {
    // exp overflows just above this point.
    const double edge = std::log(std::numeric_limits<double>::max()) - 1e-6;
    try {
        grad_check([](Graph&, Var x) { return sum(exp(x)); }, Tensor::vector({0.0, edge}));
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        EXPECT_EQ(e.coordinate(), 1u);
    }
}

TEST(GradCheck, DetectsWrongGradient) {
    // detach hides the dependence from backward, so the check must fail.
    const auto report = grad_check([](Graph&, Var x) { return sum(mul(x, detach(x))); }, Tensor::vector({1.0, 2.0}));
    EXPECT_FALSE(report.pass);
}

// Every primitive at 100 random points.
TEST(GradCheckProperty, PrimitivesAtRandomPoints) {
    using Unary = std::function<Var(Var)>;
    const std::vector<std::pair<std::string, Unary>> unary{
        {"exp", [](Var x) { return exp(x); }},
        {"log", [](Var x) { return log(add(mul(x, x), x.graph->constant(Tensor::scalar(0.5)))); }},
        {"tanh", [](Var x) { return tanh(x); }},
        {"sigmoid", [](Var x) { return sigmoid(x); }},
        {"relu", [](Var x) { return relu(x); }},
        {"softmax", [](Var x) { return softmax(x); }},
        {"sum", [](Var x) { return sum(x); }},
        {"mean", [](Var x) { return mean(x); }},
        {"squared_norm", [](Var x) { return squared_norm(x); }},
        {"slice", [](Var x) { return slice(x, 1, 1, 3); }},
        {"concat", [](Var x) { return concat({x, mul(x, x)}, 0); }},
        {"matmul", [](Var x) { return matmul(x, reshape(x, {3, 2})); }},
        {"mul", [](Var x) { return mul(x, x); }},
        {"sub", [](Var x) { return sub(x, tanh(x)); }},
        {"div", [](Var x) { return div(x, shift(mul(x, x), 1.0)); }},
    };
    Rng rng = make_rng(2024);
    for (const auto& [name, op] : unary) {
        double worst = 0;
        for (int trial = 0; trial < 100; ++trial) {
            Tensor x = random_tensor({2, 3}, rng, -2, 2);
            // keep relu away from its kink
            for (auto& v : x.data())
                if (std::abs(v) < 1e-3) v = 0.5;
            const Tensor weights = random_tensor(
                [&] {
                    Graph g;
                    return op(g.constant(x)).shape();
                }(),
                rng);
            const auto report =
                grad_check([&](Graph& g, Var v) { return sum(mul(op(v), g.constant(weights))); }, x, 1e-5, 1e-4);
            worst = std::max(worst, report.max_rel_err);
        }
        EXPECT_LT(worst, 1e-4) << name;
    }
}

TEST(Random, StreamsAreIndependentAndDeterministic) {
    Rng a = make_rng(7, 0), b = make_rng(7, 0), c = make_rng(7, 1), d = make_rng(8, 0);
    const auto x = a(), y = b(), z = c(), w = d();
    EXPECT_EQ(x, y);
    EXPECT_NE(x, z);
    EXPECT_NE(x, w);
}
