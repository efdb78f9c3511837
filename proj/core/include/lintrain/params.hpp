#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lintrain/errors.hpp"
#include "lintrain/tensor.hpp"

namespace lintrain {

struct ParamEntry {
    std::string name;
    std::vector<std::int64_t> shape;
    std::int64_t offset = 0;
    std::int64_t count = 0;

    bool operator==(const ParamEntry&) const = default;
};

/// Ordered (name, shape, offset) records mapping a flat parameter array back
/// to per-layer tensors. Offsets are contiguous and non-overlapping.
class ParamLayout {
  public:
    /// Appends an entry; returns its index.
    std::size_t add(std::string name, std::vector<std::int64_t> shape) {
        ParamEntry e;
        e.count = TensorT<float>::checked_size(shape);
        e.name = std::move(name);
        e.shape = std::move(shape);
        e.offset = total_;
        total_ += e.count;
        entries_.push_back(std::move(e));
        return entries_.size() - 1;
    }

    const std::vector<ParamEntry>& entries() const { return entries_; }
    const ParamEntry& entry(std::size_t i) const { return entries_[i]; }
    std::size_t entry_count() const { return entries_.size(); }
    std::int64_t total() const { return total_; }

    bool operator==(const ParamLayout& other) const {
        return total_ == other.total_ && entries_ == other.entries_;
    }

  private:
    std::vector<ParamEntry> entries_;
    std::int64_t total_ = 0;
};

using ParamLayoutPtr = std::shared_ptr<const ParamLayout>;

inline bool same_layout(const ParamLayoutPtr& a, const ParamLayoutPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    return *a == *b;
}

/// Flat parameter array of length p plus the layout mapping back to per-layer
/// shapes. Houses trained weights, frozen initializations and gradients alike.
template <typename T>
class ParamVectorT {
  public:
    ParamVectorT() = default;

    explicit ParamVectorT(ParamLayoutPtr layout)
        : layout_(std::move(layout)),
          data_(layout_ ? static_cast<std::size_t>(layout_->total()) : 0, T(0)) {}

    const ParamLayoutPtr& layout() const { return layout_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    T* ptr() { return data_.data(); }
    const T* ptr() const { return data_.data(); }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    std::span<T> slice(std::size_t entry_index) {
        const ParamEntry& e = layout_->entry(entry_index);
        return std::span<T>(data_.data() + e.offset, static_cast<std::size_t>(e.count));
    }
    std::span<const T> slice(std::size_t entry_index) const {
        const ParamEntry& e = layout_->entry(entry_index);
        return std::span<const T>(data_.data() + e.offset, static_cast<std::size_t>(e.count));
    }

    /// Copies one entry out as a tensor of the entry's shape.
    TensorT<T> entry_tensor(std::size_t entry_index) const {
        const ParamEntry& e = layout_->entry(entry_index);
        std::vector<T> v(data_.begin() + e.offset, data_.begin() + e.offset + e.count);
        return TensorT<T>::from_data(e.shape, std::move(v));
    }

    void fill(T value) {
        for (auto& v : data_) v = value;
    }

    bool bit_equal(const ParamVectorT& other) const { return data_ == other.data_; }

  private:
    ParamLayoutPtr layout_;
    std::vector<T> data_;
};

/// Requires two vectors to share a layout (by value), else throws LayoutError.
template <typename T>
void require_same_layout(const ParamVectorT<T>& a, const ParamVectorT<T>& b,
                         const char* where) {
    if (!same_layout(a.layout(), b.layout()))
        throw LayoutError(std::string(where) + ": parameter layouts differ");
}

} // namespace lintrain
