#pragma once

#include <cstdint>

#include "lintrain/graph.hpp"
#include "lintrain/params.hpp"
#include "lintrain/tensor.hpp"

namespace lintrain {

/// Reverse-mode sweep: gradient of <cotangent, output> with respect to every
/// parameter leaf, accumulated in a fixed reverse-topological order.
template <typename T>
ParamVectorT<T> vjp(const GraphT<T>& graph, const TensorT<T>& cotangent);

/// Forward-mode sweep: exact directional derivative of the output in the
/// parameter direction `tangent`, over the same recorded graph. Max-pool nodes
/// route the tangent through the stored argmax; relu passes zero where the
/// forward input was <= 0.
template <typename T>
TensorT<T> jvp(const GraphT<T>& graph, const ParamVectorT<T>& tangent);

/// Central-difference verification of vjp on sampled parameter coordinates
/// (64-bit only). Returns the worst relative error, with denominator
/// max(|analytic|, |numeric|, 1e-8).
double grad_check(const GraphT<double>& graph, const TensorT<double>& cotangent,
                  double step, std::int64_t sample_count, std::uint64_t seed = 17);

} // namespace lintrain
