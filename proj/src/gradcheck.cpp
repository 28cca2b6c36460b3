#include "fuselab/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fuselab/errors.hpp"

namespace fuselab {

namespace {

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

template <class Eval>
double probe(Eval&& eval, std::size_t coordinate) {
    double v = 0.0;
    try {
        v = eval();
    } catch (const NumericError& e) {
        throw EvaluationError(coordinate, e.what());
    } catch (const DomainError& e) {
        throw EvaluationError(coordinate, e.what());
    }
    if (!std::isfinite(v)) throw EvaluationError(coordinate, "function value is not finite");
    return v;
}

void record(CheckReport& report, std::size_t coordinate, double analytic, double numeric) {
    const double err = relative_error(analytic, numeric);
    if (report.coordinates == 0 || err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_coordinate = coordinate;
    }
    ++report.coordinates;
}

}  // namespace

CheckReport grad_check(const TensorFn& f, const Tensor& point, double h, double tol) {
    std::vector<double> analytic;
    {
        Graph g;
        Var x = g.variable(point, true);
        Var y = f(g, x);
        if (y.numel() != 1) throw ContractError("grad_check: function is not scalar-valued");
        g.backward(y);
        auto gx = g.grad(x);
        analytic.assign(point.numel(), 0.0);
        std::copy(gx.begin(), gx.end(), analytic.begin());
    }
    auto eval_at = [&](const Tensor& p) {
        Graph g;
        Var x = g.variable(p, false);
        return f(g, x).item();
    };
    CheckReport report;
    Tensor probe_point = point;
    for (std::size_t i = 0; i < point.numel(); ++i) {
        const double x0 = point[i];
        probe_point[i] = x0 + h;
        const double fp = probe([&] { return eval_at(probe_point); }, i);
        probe_point[i] = x0 - h;
        const double fm = probe([&] { return eval_at(probe_point); }, i);
        probe_point[i] = x0;
        record(report, i, analytic[i], (fp - fm) / (2.0 * h));
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

CheckReport grad_check_params(const ParamFn& f, std::span<Tensor* const> params, double h, double tol) {
    for (Tensor* p : params) {
        p->set_requires_grad(true);
        p->zero_grad();
    }
    {
        Graph g;
        Var y = f(g);
        if (y.numel() != 1) throw ContractError("grad_check: function is not scalar-valued");
        g.backward(y);
    }
    auto eval = [&] {
        Graph g;
        return f(g).item();
    };
    CheckReport report;
    std::size_t coordinate = 0;
    for (Tensor* p : params) {
        const std::vector<double> analytic(p->grad().begin(), p->grad().end());
        for (std::size_t i = 0; i < p->numel(); ++i, ++coordinate) {
            const double x0 = (*p)[i];
            (*p)[i] = x0 + h;
            const double fp = probe(eval, coordinate);
            (*p)[i] = x0 - h;
            const double fm = probe(eval, coordinate);
            (*p)[i] = x0;
            record(report, coordinate, analytic.empty() ? 0.0 : analytic[i], (fp - fm) / (2.0 * h));
        }
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

}  // namespace fuselab
