#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lintrain/arch.hpp"
#include "lintrain/feature_matrix.hpp"
#include "lintrain/params.hpp"
#include "lintrain/tensor.hpp"

namespace lintrain {

/// Exact first-order tangent of a network around frozen base parameters w0,
/// with trainable offset u (initialized to zero): per output slot l,
/// model(u, x) = base_l(w0, x) + u . grad_w base_l(w0, x).
template <typename T>
struct TangentModelT {
    NetworkSpec spec;
    ParamVectorT<T> w0; // frozen after construction
    ParamVectorT<T> u;  // same layout, starts at zero
};

template <typename T>
TangentModelT<T> make_tangent(NetworkSpec spec, ParamVectorT<T> w0) {
    TangentModelT<T> tm{std::move(spec), std::move(w0), {}};
    tm.u = ParamVectorT<T>(tm.w0.layout());
    return tm;
}

/// One base forward pass plus one JVP sweep per batch.
template <typename T>
TensorT<T> tangent_forward(const TangentModelT<T>& tm, const TensorT<T>& batch);

/// Gradient of the batch-averaged squared error with respect to u:
/// (2/N) sum_n grads at w0 weighted by the residual. One forward, one JVP,
/// one VJP; never materializes the embedding.
template <typename T>
ParamVectorT<T> tangent_loss_grad(const TangentModelT<T>& tm, const TensorT<T>& batch,
                                  const TensorT<T>& targets);

/// Same reverse sweep with an injected residual (outputs - targets). Exposes
/// the fact that the embedding is frozen: the result does not depend on u.
template <typename T>
ParamVectorT<T> tangent_grad_with_residual(const TangentModelT<T>& tm,
                                           const TensorT<T>& batch,
                                           const TensorT<T>& residual);

/// Rows [first, last) of the feature embedding, in example-major order
/// ((i*L + l) indexes example i, output slot l); L one-hot VJP calls per
/// example. Bounds are example indices.
template <typename T>
TensorT<T> embed_rows(const TangentModelT<T>& tm, const TensorT<T>& examples,
                      std::int64_t first_example, std::int64_t last_example);

/// Dense feature matrix A (n = L*m rows, p columns). Refuses to materialize
/// past the element budget; large instances go through the Gram path in
/// diagnostics instead.
template <typename T>
FeatureMatrixT<T> embed_features(const TangentModelT<T>& tm, const TensorT<T>& examples,
                                 std::int64_t budget_elems);

/// Per-example Euclidean norm of f(w0+u, x) - tangent(u, x): the first-order
/// Taylor remainder at offset u.
template <typename T>
std::vector<double> taylor_gap(const NetworkSpec& spec, const ParamVectorT<T>& w0,
                               const ParamVectorT<T>& u, const TensorT<T>& batch);

/// Copies one example out of an [M,C,H,W] tensor as a batch of one.
template <typename T>
TensorT<T> slice_example(const TensorT<T>& examples, std::int64_t index);

} // namespace lintrain
