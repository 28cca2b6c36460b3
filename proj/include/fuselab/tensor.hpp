#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fuselab {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// The gradient buffer is mutable: parameters are bound into graphs through
/// const references and backward accumulates into them. A tensor whose
/// requires_grad flag is off is treated as a constant by every graph.
class Tensor {
public:
    Tensor();
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    static Tensor row(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t numel() const noexcept { return data_.size(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    // 2-D element access.
    double at(std::size_t r, std::size_t c) const;
    double& at(std::size_t r, std::size_t c);

    // Value of a single-element tensor.
    double item() const;

    bool requires_grad() const noexcept { return requires_grad_; }
    void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

    bool has_grad() const noexcept { return !grad_.empty(); }
    std::span<const double> grad() const noexcept { return grad_; }
    std::span<double> grad_mut() const noexcept { return grad_; }
    void accumulate_grad(std::span<const double> g) const;
    void zero_grad() const;
    void clear_grad() const noexcept { grad_.clear(); }

    bool all_finite() const noexcept;
    Tensor reshaped(Shape shape) const;

    // Compares shape and values only.
    friend bool operator==(const Tensor& a, const Tensor& b) noexcept {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    std::vector<double> data_;
    bool requires_grad_ = false;
    mutable std::vector<double> grad_;
};

}  // namespace fuselab
