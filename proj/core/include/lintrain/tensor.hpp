#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lintrain/errors.hpp"

namespace lintrain {

/// Dense row-major n-dimensional float array. The universal value type of the
/// library: network inputs, activations, parameters-as-tensors, CSV-bound
/// matrices. Immutable by convention once an operation has produced it.
template <typename T>
class TensorT {
  public:
    TensorT() = default;

    /// Zero-filled tensor of the given shape. All extents must be >= 1.
    explicit TensorT(std::vector<std::int64_t> shape)
        : shape_(std::move(shape)), data_(checked_size(shape_), T(0)) {}

    static TensorT full(std::vector<std::int64_t> shape, T value) {
        TensorT t(std::move(shape));
        for (auto& v : t.data_) v = value;
        return t;
    }

    static TensorT from_data(std::vector<std::int64_t> shape, std::vector<T> data) {
        TensorT t;
        t.shape_ = std::move(shape);
        if (static_cast<std::int64_t>(data.size()) != checked_size(t.shape_))
            throw ShapeError("tensor data length does not match shape");
        t.data_ = std::move(data);
        return t;
    }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* ptr() { return data_.data(); }
    const T* ptr() const { return data_.data(); }
    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    /// Row-major reshape; element count must be preserved.
    TensorT reshaped(std::vector<std::int64_t> shape) const {
        if (checked_size(shape) != size())
            throw ShapeError("reshape changes element count");
        TensorT t;
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

    bool bit_equal(const TensorT& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

    static std::int64_t checked_size(const std::vector<std::int64_t>& shape) {
        std::int64_t n = 1;
        for (auto e : shape) {
            if (e < 1) throw ShapeError("tensor extent must be >= 1");
            n *= e;
        }
        return n;
    }

  private:
    std::vector<std::int64_t> shape_;
    std::vector<T> data_;
};

using Tensor32 = TensorT<float>;
using Tensor64 = TensorT<double>;

} // namespace lintrain
