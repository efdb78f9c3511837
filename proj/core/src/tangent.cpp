#include "lintrain/tangent.hpp"

#include <algorithm>
#include <cmath>

#include "lintrain/autodiff.hpp"
#include "lintrain/ops.hpp"

namespace lintrain {

namespace {

template <typename T>
TensorT<T> added(const TensorT<T>& a, const TensorT<T>& b) {
    TensorT<T> out(a.shape());
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* po = out.ptr();
    for (std::int64_t i = 0, e = a.size(); i < e; ++i) po[i] = pa[i] + pb[i];
    return out;
}

} // namespace

template <typename T>
TensorT<T> slice_example(const TensorT<T>& examples, std::int64_t index) {
    if (examples.rank() != 4) throw ShapeError("slice_example: expected [M,C,H,W]");
    if (index < 0 || index >= examples.dim(0))
        throw ShapeError("slice_example: index out of range");
    const std::int64_t per = examples.size() / examples.dim(0);
    TensorT<T> out({1, examples.dim(1), examples.dim(2), examples.dim(3)});
    const T* src = examples.ptr() + index * per;
    std::copy(src, src + per, out.ptr());
    return out;
}

template <typename T>
TensorT<T> tangent_forward(const TangentModelT<T>& tm, const TensorT<T>& batch) {
    auto [base, graph] = forward(tm.spec, tm.w0, batch);
    return added(base, jvp(graph, tm.u));
}

template <typename T>
ParamVectorT<T> tangent_loss_grad(const TangentModelT<T>& tm, const TensorT<T>& batch,
                                  const TensorT<T>& targets) {
    auto [base, graph] = forward(tm.spec, tm.w0, batch);
    const TensorT<T> outputs = added(base, jvp(graph, tm.u));
    return vjp(graph, ops::l2_loss_cotangent(outputs, targets));
}

template <typename T>
ParamVectorT<T> tangent_grad_with_residual(const TangentModelT<T>& tm,
                                           const TensorT<T>& batch,
                                           const TensorT<T>& residual) {
    auto [base, graph] = forward(tm.spec, tm.w0, batch);
    if (!base.same_shape(residual))
        throw ShapeError("tangent_grad_with_residual: residual shape mismatch");
    TensorT<T> cot(residual.shape());
    const T scale = T(2) / static_cast<T>(residual.dim(0));
    const T* pr = residual.ptr();
    T* pc = cot.ptr();
    for (std::int64_t i = 0, e = residual.size(); i < e; ++i) pc[i] = scale * pr[i];
    return vjp(graph, cot);
}

template <typename T>
TensorT<T> embed_rows(const TangentModelT<T>& tm, const TensorT<T>& examples,
                      std::int64_t first_example, std::int64_t last_example) {
    const std::int64_t num_outputs = tm.spec.num_classes;
    const std::int64_t p = tm.w0.size();
    TensorT<T> rows({(last_example - first_example) * num_outputs, p});
    T* dst = rows.ptr();
    for (std::int64_t i = first_example; i < last_example; ++i) {
        auto [base, graph] = forward(tm.spec, tm.w0, slice_example(examples, i));
        for (std::int64_t l = 0; l < num_outputs; ++l) {
            TensorT<T> onehot({1, num_outputs});
            onehot[l] = T(1);
            const ParamVectorT<T> grad = vjp(graph, onehot);
            const T* src = grad.ptr();
            std::copy(src, src + p, dst);
            dst += p;
        }
    }
    return rows;
}

template <typename T>
FeatureMatrixT<T> embed_features(const TangentModelT<T>& tm, const TensorT<T>& examples,
                                 std::int64_t budget_elems) {
    if (examples.rank() != 4 || examples.dim(0) < 1)
        throw ShapeError("embed_features: expected [m,C,H,W] with m >= 1");
    const std::int64_t m = examples.dim(0);
    const std::int64_t n = m * tm.spec.num_classes;
    const std::int64_t p = tm.w0.size();
    if (n * p > budget_elems)
        throw BudgetError("embed_features: dense matrix of " + std::to_string(n * p) +
                          " elements exceeds the budget of " + std::to_string(budget_elems) +
                          "; use the Gram path");
    FeatureMatrixT<T> fm;
    fm.kind = FeatureMatrixT<T>::Kind::Dense;
    fm.dense = embed_rows(tm, examples, 0, m);
    fm.examples = m;
    fm.outputs = tm.spec.num_classes;
    fm.width_factor = tm.spec.width_factor;
    return fm;
}

template <typename T>
std::vector<double> taylor_gap(const NetworkSpec& spec, const ParamVectorT<T>& w0,
                               const ParamVectorT<T>& u, const TensorT<T>& batch) {
    require_same_layout(w0, u, "taylor_gap");
    ParamVectorT<T> shifted = w0;
    {
        T* pw = shifted.ptr();
        const T* pu = u.ptr();
        for (std::int64_t i = 0, e = shifted.size(); i < e; ++i) pw[i] += pu[i];
    }
    const TensorT<T> exact = predict(spec, shifted, batch);

    TangentModelT<T> tm{spec, w0, u};
    const TensorT<T> linear = tangent_forward(tm, batch);

    const std::int64_t n = exact.dim(0), l = exact.dim(1);
    std::vector<double> gaps(static_cast<std::size_t>(n));
    const T* pe = exact.ptr();
    const T* pl = linear.ptr();
    for (std::int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < l; ++j) {
            const double d = static_cast<double>(pe[i * l + j]) - static_cast<double>(pl[i * l + j]);
            acc += d * d;
        }
        gaps[static_cast<std::size_t>(i)] = std::sqrt(acc);
    }
    return gaps;
}

#define LINTRAIN_INSTANTIATE_TANGENT(T)                                                     \
    template TensorT<T> slice_example<T>(const TensorT<T>&, std::int64_t);                  \
    template TensorT<T> tangent_forward<T>(const TangentModelT<T>&, const TensorT<T>&);     \
    template ParamVectorT<T> tangent_loss_grad<T>(const TangentModelT<T>&, const TensorT<T>&, \
                                                  const TensorT<T>&);                       \
    template ParamVectorT<T> tangent_grad_with_residual<T>(const TangentModelT<T>&,         \
                                                           const TensorT<T>&,               \
                                                           const TensorT<T>&);              \
    template TensorT<T> embed_rows<T>(const TangentModelT<T>&, const TensorT<T>&,           \
                                      std::int64_t, std::int64_t);                          \
    template FeatureMatrixT<T> embed_features<T>(const TangentModelT<T>&, const TensorT<T>&, \
                                                 std::int64_t);                             \
    template std::vector<double> taylor_gap<T>(const NetworkSpec&, const ParamVectorT<T>&,  \
                                               const ParamVectorT<T>&, const TensorT<T>&);

LINTRAIN_INSTANTIATE_TANGENT(float)
LINTRAIN_INSTANTIATE_TANGENT(double)

} // namespace lintrain
