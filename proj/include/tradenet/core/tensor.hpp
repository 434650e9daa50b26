#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <vector>

#include "tradenet/core/error.hpp"

namespace tradenet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major array of doubles with an optional gradient buffer of the
/// same shape. Plain value type: copying copies data and gradient.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
        check_dims();
    }

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_dims();
        if (data_.size() != shape_numel(shape_)) {
            fail(ErrorKind::shape, "tensor data length " + std::to_string(data_.size()) +
                                       " does not match shape " + shape_str(shape_));
        }
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }

    static Tensor from(std::initializer_list<double> values) {
        return Tensor({values.size()}, std::vector<double>(values));
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t c, std::size_t i, std::size_t j) {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }
    double at(std::size_t c, std::size_t i, std::size_t j) const {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }

    bool has_grad() const { return !grad_.empty(); }

    std::span<double> grad() {
        if (grad_.empty()) grad_.assign(data_.size(), 0.0);
        return grad_;
    }
    std::span<const double> grad() const { return grad_; }

    void zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }
    void drop_grad() { grad_.clear(); }

    /// Same data viewed under a new shape with equal element count.
    Tensor reshaped(Shape shape) const {
        Tensor out(std::move(shape), data_);
        return out;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void check_dims() const {
        for (std::size_t d : shape_) {
            if (d == 0) fail(ErrorKind::shape, "tensor dimensions must be positive, got " + shape_str(shape_));
        }
    }

    Shape shape_;
    std::vector<double> data_;
    std::vector<double> grad_;
};

/// A parameter tensor paired with a stable name (used by optimizers for error
/// messages and by checkpoints as the manifest key).
struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

}  // namespace tradenet
