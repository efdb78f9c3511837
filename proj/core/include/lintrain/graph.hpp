#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lintrain/params.hpp"
#include "lintrain/tensor.hpp"

namespace lintrain {

enum class OpKind { Input, Param, Conv2d, MaxPool2, Relu, Affine, Flatten };

template <typename T>
struct GraphNode {
    OpKind kind;
    int x = -1, w = -1, b = -1; // operand node ids
    std::int64_t stride = 1, pad = 0;
    TensorT<T> value;
    std::vector<std::int32_t> argmax; // MaxPool2 auxiliary for backward/forward-mode
};

/// Topologically ordered record of one forward pass. Leaves (inputs and
/// parameters) come wherever they were added; every non-leaf node's operands
/// precede it. Single-writer while recording, immutable afterwards; replaying
/// reproduces each stored value bit-exactly.
template <typename T>
class GraphT {
  public:
    int add_input(TensorT<T> value);
    /// Adds a parameter leaf; order of calls defines the layout.
    int add_param(std::string name, TensorT<T> value);

    int apply_conv2d(int x, int w, int b, std::int64_t stride, std::int64_t pad);
    int apply_maxpool2(int x);
    int apply_relu(int x);
    int apply_affine(int x, int w, int b);
    int apply_flatten(int x);

    void mark_output(int id);

    int node_count() const { return static_cast<int>(nodes_.size()); }
    const GraphNode<T>& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    const TensorT<T>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    int output_id() const { return output_; }
    const TensorT<T>& output() const { return nodes_[static_cast<std::size_t>(output_)].value; }

    /// Parameter leaf node ids in layout order.
    const std::vector<int>& param_ids() const { return param_ids_; }
    ParamLayoutPtr layout() const;

    /// Replaces a leaf's value (shape must match). Non-leaf values go stale
    /// until replay() recomputes them.
    void set_leaf(int id, TensorT<T> value);
    /// Recomputes every non-leaf node in topological order.
    void replay();

  private:
    int push(GraphNode<T> node);
    void compute(GraphNode<T>& node) const;
    void check_id(int id) const;

    std::vector<GraphNode<T>> nodes_;
    std::vector<int> param_ids_;
    ParamLayout building_layout_;
    mutable ParamLayoutPtr cached_layout_;
    int output_ = -1;
};

using Graph32 = GraphT<float>;
using Graph64 = GraphT<double>;

} // namespace lintrain
