#include "lintrain/graph.hpp"

#include "lintrain/ops.hpp"

namespace lintrain {

template <typename T>
int GraphT<T>::push(GraphNode<T> node) {
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

template <typename T>
void GraphT<T>::check_id(int id) const {
    if (id < 0 || id >= node_count()) throw Error("graph: node id out of range");
}

template <typename T>
int GraphT<T>::add_input(TensorT<T> value) {
    GraphNode<T> n;
    n.kind = OpKind::Input;
    n.value = std::move(value);
    return push(std::move(n));
}

template <typename T>
int GraphT<T>::add_param(std::string name, TensorT<T> value) {
    building_layout_.add(std::move(name), value.shape());
    cached_layout_.reset();
    GraphNode<T> n;
    n.kind = OpKind::Param;
    n.value = std::move(value);
    const int id = push(std::move(n));
    param_ids_.push_back(id);
    return id;
}

template <typename T>
ParamLayoutPtr GraphT<T>::layout() const {
    if (!cached_layout_) cached_layout_ = std::make_shared<ParamLayout>(building_layout_);
    return cached_layout_;
}

template <typename T>
void GraphT<T>::compute(GraphNode<T>& n) const {
    switch (n.kind) {
    case OpKind::Input:
    case OpKind::Param:
        break;
    case OpKind::Conv2d:
        n.value = ops::conv2d(value(n.x), value(n.w), value(n.b), n.stride, n.pad);
        break;
    case OpKind::MaxPool2: {
        auto [out, argmax] = ops::maxpool2(value(n.x));
        n.value = std::move(out);
        n.argmax = std::move(argmax);
        break;
    }
    case OpKind::Relu:
        n.value = ops::relu(value(n.x));
        break;
    case OpKind::Affine:
        n.value = ops::affine(value(n.x), value(n.w), value(n.b));
        break;
    case OpKind::Flatten:
        n.value = ops::flatten(value(n.x));
        break;
    }
}

template <typename T>
int GraphT<T>::apply_conv2d(int x, int w, int b, std::int64_t stride, std::int64_t pad) {
    check_id(x);
    check_id(w);
    check_id(b);
    GraphNode<T> n;
    n.kind = OpKind::Conv2d;
    n.x = x;
    n.w = w;
    n.b = b;
    n.stride = stride;
    n.pad = pad;
    compute(n);
    return push(std::move(n));
}

template <typename T>
int GraphT<T>::apply_maxpool2(int x) {
    check_id(x);
    GraphNode<T> n;
    n.kind = OpKind::MaxPool2;
    n.x = x;
    compute(n);
    return push(std::move(n));
}

template <typename T>
int GraphT<T>::apply_relu(int x) {
    check_id(x);
    GraphNode<T> n;
    n.kind = OpKind::Relu;
    n.x = x;
    compute(n);
    return push(std::move(n));
}

template <typename T>
int GraphT<T>::apply_affine(int x, int w, int b) {
    check_id(x);
    check_id(w);
    check_id(b);
    GraphNode<T> n;
    n.kind = OpKind::Affine;
    n.x = x;
    n.w = w;
    n.b = b;
    compute(n);
    return push(std::move(n));
}

template <typename T>
int GraphT<T>::apply_flatten(int x) {
    check_id(x);
    GraphNode<T> n;
    n.kind = OpKind::Flatten;
    n.x = x;
    compute(n);
    return push(std::move(n));
}

template <typename T>
void GraphT<T>::mark_output(int id) {
    check_id(id);
    output_ = id;
}

template <typename T>
void GraphT<T>::set_leaf(int id, TensorT<T> value) {
    check_id(id);
    GraphNode<T>& n = nodes_[static_cast<std::size_t>(id)];
    if (n.kind != OpKind::Input && n.kind != OpKind::Param)
        throw Error("graph: set_leaf on a non-leaf node");
    if (!n.value.same_shape(value)) throw ShapeError("graph: set_leaf shape mismatch");
    n.value = std::move(value);
}

template <typename T>
void GraphT<T>::replay() {
    for (auto& n : nodes_) compute(n);
}

template class GraphT<float>;
template class GraphT<double>;

} // namespace lintrain
