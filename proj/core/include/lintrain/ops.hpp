#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lintrain/tensor.hpp"

namespace lintrain::ops {

// Matrix kernels. All accumulation runs in a fixed ascending-index order so
// results are bit-reproducible; the conv/affine forward, VJP and JVP paths
// all reduce to these three.

/// C[M,N] = A[M,K] * B[K,N]
template <typename T>
TensorT<T> matmul_nn(const TensorT<T>& a, const TensorT<T>& b);

/// C[M,N] = A[M,K] * B[N,K]^T  (row-by-row dot products)
template <typename T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b);

/// C[K,N] = A[M,K]^T * B[M,N]
template <typename T>
TensorT<T> matmul_tn(const TensorT<T>& a, const TensorT<T>& b);

struct Conv2dDims {
    std::int64_t batch, in_channels, in_h, in_w;
    std::int64_t out_channels, kernel_h, kernel_w;
    std::int64_t stride, pad;
    std::int64_t out_h, out_w;
};

/// Validates conv operand shapes and resolves output extents.
Conv2dDims conv2d_dims(const std::vector<std::int64_t>& input_shape,
                       const std::vector<std::int64_t>& kernel_shape,
                       const std::vector<std::int64_t>& bias_shape,
                       std::int64_t stride, std::int64_t pad);

/// Patch-matrix expansion: rows indexed by (n, out_y, out_x), columns by
/// (c, ky, kx); out-of-range reads contribute zero.
template <typename T>
TensorT<T> im2col(const TensorT<T>& input, const Conv2dDims& d);

/// Transpose of im2col: scatter-adds patch-row gradients back onto the input,
/// in patch-row order.
template <typename T>
TensorT<T> col2im(const TensorT<T>& patches, const Conv2dDims& d);

/// out[n,k,i,j] = bias[k] + sum_{c,a,b} input[n,c,i*s+a-p, j*s+b-p] * kernel[k,c,a,b]
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& kernel,
                  const TensorT<T>& bias, std::int64_t stride, std::int64_t pad);

/// Non-overlapping 2x2 max pooling. H and W must be even. argmax holds the
/// flat within-window index (row-major scan, ties keep the first).
template <typename T>
std::pair<TensorT<T>, std::vector<std::int32_t>> maxpool2(const TensorT<T>& input);

template <typename T>
TensorT<T> relu(const TensorT<T>& input);

/// out[N,M] = input[N,D] * weight[D,M] + bias[M] (bias broadcast over rows)
template <typename T>
TensorT<T> affine(const TensorT<T>& input, const TensorT<T>& weight,
                  const TensorT<T>& bias);

/// Row-major flatten preserving the leading batch extent.
template <typename T>
TensorT<T> flatten(const TensorT<T>& input);

/// (1/N) * sum_n sum_l (out[n,l] - tgt[n,l])^2
template <typename T>
double l2_loss(const TensorT<T>& outputs, const TensorT<T>& targets);

/// d(l2_loss)/d(outputs): (2/N) * (outputs - targets)
template <typename T>
TensorT<T> l2_loss_cotangent(const TensorT<T>& outputs, const TensorT<T>& targets);

} // namespace lintrain::ops
