#include "fuselab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fuselab/errors.hpp"

namespace fuselab {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
    for (auto d : shape)
        if (d == 0) throw DimensionError("tensor shape " + shape_string(shape) + " has a zero dimension");
}

}  // namespace

Tensor::Tensor() : shape_{1}, data_(1, 0.0) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (shape_size(shape_) != data_.size())
        throw DimensionError("shape " + shape_string(shape_) + " does not match " + std::to_string(data_.size()) +
                             " values");
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
    const auto n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::row(std::vector<double> values) {
    const auto n = values.size();
    return Tensor({1, n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * shape_.back() + c]; }
double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * shape_.back() + c]; }

double Tensor::item() const {
    if (data_.size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
}

void Tensor::accumulate_grad(std::span<const double> g) const {
    if (g.size() != data_.size()) throw DimensionError("gradient size does not match tensor");
    if (grad_.empty()) grad_.assign(data_.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) grad_[i] += g[i];
}

void Tensor::zero_grad() const {
    if (grad_.empty())
        grad_.assign(data_.size(), 0.0);
    else
        std::fill(grad_.begin(), grad_.end(), 0.0);
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size())
        throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), data_);
}

}  // namespace fuselab
