#include "lintrain/ops.hpp"

#include <string>

#include "lintrain/parallel.hpp"

namespace lintrain::ops {

namespace {

// worth spawning threads only past this many multiply-adds
constexpr std::int64_t kParallelFlopCutoff = std::int64_t(1) << 18;

} // namespace

template <typename T>
TensorT<T> matmul_nn(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul_nn: incompatible shapes");
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    TensorT<T> c({m, n});
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* pc = c.ptr();
    auto rows = [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            for (std::int64_t q = 0; q < k; ++q) {
                const T av = pa[i * k + q];
                const T* brow = pb + q * n;
                T* crow = pc + i * n;
                for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    };
    if (m * k * n >= kParallelFlopCutoff && m > 1)
        parallel_for(0, m, rows);
    else
        rows(0, m);
    return c;
}

template <typename T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw ShapeError("matmul_nt: incompatible shapes");
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    TensorT<T> c({m, n});
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* pc = c.ptr();
    auto rows = [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            const T* arow = pa + i * k;
            for (std::int64_t j = 0; j < n; ++j) {
                const T* brow = pb + j * k;
                T acc = 0;
                for (std::int64_t q = 0; q < k; ++q) acc += arow[q] * brow[q];
                pc[i * n + j] = acc;
            }
        }
    };
    if (m * k * n >= kParallelFlopCutoff && m > 1)
        parallel_for(0, m, rows);
    else
        rows(0, m);
    return c;
}

template <typename T>
TensorT<T> matmul_tn(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
        throw ShapeError("matmul_tn: incompatible shapes");
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    TensorT<T> c({k, n});
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* pc = c.ptr();
    // each worker owns a block of output rows (a k-range) and scans all of
    // a/b; per-element accumulation stays m-ascending exactly as serially
    auto krange = [&](std::int64_t q0, std::int64_t q1) {
        for (std::int64_t i = 0; i < m; ++i) {
            const T* arow = pa + i * k;
            const T* brow = pb + i * n;
            for (std::int64_t q = q0; q < q1; ++q) {
                const T av = arow[q];
                T* crow = pc + q * n;
                for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    };
    if (m * k * n >= kParallelFlopCutoff && k > 1)
        parallel_for(0, k, krange);
    else
        krange(0, k);
    return c;
}

Conv2dDims conv2d_dims(const std::vector<std::int64_t>& input_shape,
                       const std::vector<std::int64_t>& kernel_shape,
                       const std::vector<std::int64_t>& bias_shape,
                       std::int64_t stride, std::int64_t pad) {
    if (input_shape.size() != 4) throw ShapeError("conv2d: input must be [N,C,H,W]");
    if (kernel_shape.size() != 4) throw ShapeError("conv2d: kernel must be [K,C,kh,kw]");
    if (bias_shape.size() != 1 || bias_shape[0] != kernel_shape[0])
        throw ShapeError("conv2d: bias must be [K]");
    if (kernel_shape[1] != input_shape[1])
        throw ShapeError("conv2d: input channels " + std::to_string(input_shape[1]) +
                         " do not match kernel channels " + std::to_string(kernel_shape[1]));
    if (stride < 1) throw ShapeError("conv2d: stride must be positive");
    if (pad < 0) throw ShapeError("conv2d: pad must be non-negative");

    Conv2dDims d{};
    d.batch = input_shape[0];
    d.in_channels = input_shape[1];
    d.in_h = input_shape[2];
    d.in_w = input_shape[3];
    d.out_channels = kernel_shape[0];
    d.kernel_h = kernel_shape[2];
    d.kernel_w = kernel_shape[3];
    d.stride = stride;
    d.pad = pad;
    if (d.in_h + 2 * pad < d.kernel_h || d.in_w + 2 * pad < d.kernel_w)
        throw ShapeError("conv2d: kernel larger than padded input");
    d.out_h = (d.in_h + 2 * pad - d.kernel_h) / stride + 1;
    d.out_w = (d.in_w + 2 * pad - d.kernel_w) / stride + 1;
    return d;
}

template <typename T>
TensorT<T> im2col(const TensorT<T>& input, const Conv2dDims& d) {
    const std::int64_t cols = d.in_channels * d.kernel_h * d.kernel_w;
    const std::int64_t rows = d.batch * d.out_h * d.out_w;
    TensorT<T> patches({rows, cols});
    const T* px = input.ptr();
    T* pp = patches.ptr();
    for (std::int64_t n = 0; n < d.batch; ++n) {
        for (std::int64_t oy = 0; oy < d.out_h; ++oy) {
            for (std::int64_t ox = 0; ox < d.out_w; ++ox) {
                T* row = pp + ((n * d.out_h + oy) * d.out_w + ox) * cols;
                std::int64_t col = 0;
                for (std::int64_t c = 0; c < d.in_channels; ++c) {
                    const T* plane = px + (n * d.in_channels + c) * d.in_h * d.in_w;
                    for (std::int64_t ky = 0; ky < d.kernel_h; ++ky) {
                        const std::int64_t iy = oy * d.stride + ky - d.pad;
                        for (std::int64_t kx = 0; kx < d.kernel_w; ++kx) {
                            const std::int64_t ix = ox * d.stride + kx - d.pad;
                            row[col++] = (iy >= 0 && iy < d.in_h && ix >= 0 && ix < d.in_w)
                                             ? plane[iy * d.in_w + ix]
                                             : T(0);
                        }
                    }
                }
            }
        }
    }
    return patches;
}

template <typename T>
TensorT<T> col2im(const TensorT<T>& patches, const Conv2dDims& d) {
    const std::int64_t cols = d.in_channels * d.kernel_h * d.kernel_w;
    if (patches.rank() != 2 || patches.dim(0) != d.batch * d.out_h * d.out_w ||
        patches.dim(1) != cols)
        throw ShapeError("col2im: patch matrix shape mismatch");
    TensorT<T> input({d.batch, d.in_channels, d.in_h, d.in_w});
    const T* pp = patches.ptr();
    T* px = input.ptr();
    for (std::int64_t n = 0; n < d.batch; ++n) {
        for (std::int64_t oy = 0; oy < d.out_h; ++oy) {
            for (std::int64_t ox = 0; ox < d.out_w; ++ox) {
                const T* row = pp + ((n * d.out_h + oy) * d.out_w + ox) * cols;
                std::int64_t col = 0;
                for (std::int64_t c = 0; c < d.in_channels; ++c) {
                    T* plane = px + (n * d.in_channels + c) * d.in_h * d.in_w;
                    for (std::int64_t ky = 0; ky < d.kernel_h; ++ky) {
                        const std::int64_t iy = oy * d.stride + ky - d.pad;
                        for (std::int64_t kx = 0; kx < d.kernel_w; ++kx, ++col) {
                            const std::int64_t ix = ox * d.stride + kx - d.pad;
                            if (iy >= 0 && iy < d.in_h && ix >= 0 && ix < d.in_w)
                                plane[iy * d.in_w + ix] += row[col];
                        }
                    }
                }
            }
        }
    }
    return input;
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& kernel,
                  const TensorT<T>& bias, std::int64_t stride, std::int64_t pad) {
    const Conv2dDims d = conv2d_dims(input.shape(), kernel.shape(), bias.shape(), stride, pad);
    const TensorT<T> patches = im2col(input, d);
    const TensorT<T> kmat =
        kernel.reshaped({d.out_channels, d.in_channels * d.kernel_h * d.kernel_w});
    // raw[(n,oy,ox), k]; the dot accumulates over (c,ky,kx) ascending.
    const TensorT<T> raw = matmul_nt(patches, kmat);
    TensorT<T> out({d.batch, d.out_channels, d.out_h, d.out_w});
    const T* praw = raw.ptr();
    const T* pb = bias.ptr();
    T* po = out.ptr();
    const std::int64_t plane = d.out_h * d.out_w;
    for (std::int64_t n = 0; n < d.batch; ++n) {
        for (std::int64_t k = 0; k < d.out_channels; ++k) {
            const T bk = pb[k];
            for (std::int64_t s = 0; s < plane; ++s)
                po[(n * d.out_channels + k) * plane + s] =
                    praw[(n * plane + s) * d.out_channels + k] + bk;
        }
    }
    return out;
}

template <typename T>
std::pair<TensorT<T>, std::vector<std::int32_t>> maxpool2(const TensorT<T>& input) {
    if (input.rank() != 4) throw ShapeError("maxpool2: input must be [N,C,H,W]");
    const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (h % 2 != 0 || w % 2 != 0) throw ShapeError("maxpool2: H and W must be even");
    const std::int64_t oh = h / 2, ow = w / 2;
    TensorT<T> out({n, c, oh, ow});
    std::vector<std::int32_t> argmax(static_cast<std::size_t>(out.size()));
    const T* px = input.ptr();
    T* po = out.ptr();
    std::int64_t oi = 0;
    for (std::int64_t nc = 0; nc < n * c; ++nc) {
        const T* plane = px + nc * h * w;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            for (std::int64_t ox = 0; ox < ow; ++ox, ++oi) {
                T best = plane[(2 * oy) * w + 2 * ox];
                std::int32_t best_idx = 0;
                for (std::int32_t s = 1; s < 4; ++s) {
                    const std::int64_t iy = 2 * oy + s / 2;
                    const std::int64_t ix = 2 * ox + s % 2;
                    const T v = plane[iy * w + ix];
                    if (v > best) {
                        best = v;
                        best_idx = s;
                    }
                }
                po[oi] = best;
                argmax[static_cast<std::size_t>(oi)] = best_idx;
            }
        }
    }
    return {std::move(out), std::move(argmax)};
}

template <typename T>
TensorT<T> relu(const TensorT<T>& input) {
    TensorT<T> out(input.shape());
    const T* px = input.ptr();
    T* po = out.ptr();
    for (std::int64_t i = 0, e = input.size(); i < e; ++i) po[i] = px[i] > T(0) ? px[i] : T(0);
    return out;
}

template <typename T>
TensorT<T> affine(const TensorT<T>& input, const TensorT<T>& weight, const TensorT<T>& bias) {
    if (input.rank() != 2) throw ShapeError("affine: input must be [N,D]");
    if (weight.rank() != 2 || weight.dim(0) != input.dim(1))
        throw ShapeError("affine: weight must be [D,M] with D matching input");
    if (bias.rank() != 1 || bias.dim(0) != weight.dim(1))
        throw ShapeError("affine: bias must be [M]");
    TensorT<T> out = matmul_nn(input, weight);
    const std::int64_t n = out.dim(0), m = out.dim(1);
    const T* pb = bias.ptr();
    T* po = out.ptr();
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < m; ++j) po[i * m + j] += pb[j];
    return out;
}

template <typename T>
TensorT<T> flatten(const TensorT<T>& input) {
    if (input.rank() < 1) throw ShapeError("flatten: input must have a batch extent");
    const std::int64_t n = input.dim(0);
    return input.reshaped({n, input.size() / n});
}

template <typename T>
double l2_loss(const TensorT<T>& outputs, const TensorT<T>& targets) {
    if (!outputs.same_shape(targets)) throw ShapeError("l2_loss: shape mismatch");
    if (outputs.rank() != 2) throw ShapeError("l2_loss: operands must be [N,L]");
    const T* po = outputs.ptr();
    const T* pt = targets.ptr();
    double acc = 0.0;
    for (std::int64_t i = 0, e = outputs.size(); i < e; ++i) {
        const double r = static_cast<double>(po[i]) - static_cast<double>(pt[i]);
        acc += r * r;
    }
    return acc / static_cast<double>(outputs.dim(0));
}

template <typename T>
TensorT<T> l2_loss_cotangent(const TensorT<T>& outputs, const TensorT<T>& targets) {
    if (!outputs.same_shape(targets)) throw ShapeError("l2_loss_cotangent: shape mismatch");
    TensorT<T> cot(outputs.shape());
    const T scale = T(2) / static_cast<T>(outputs.dim(0));
    const T* po = outputs.ptr();
    const T* pt = targets.ptr();
    T* pc = cot.ptr();
    for (std::int64_t i = 0, e = outputs.size(); i < e; ++i) pc[i] = scale * (po[i] - pt[i]);
    return cot;
}

#define LINTRAIN_INSTANTIATE_OPS(T)                                                       \
    template TensorT<T> matmul_nn<T>(const TensorT<T>&, const TensorT<T>&);               \
    template TensorT<T> matmul_nt<T>(const TensorT<T>&, const TensorT<T>&);               \
    template TensorT<T> matmul_tn<T>(const TensorT<T>&, const TensorT<T>&);               \
    template TensorT<T> im2col<T>(const TensorT<T>&, const Conv2dDims&);                  \
    template TensorT<T> col2im<T>(const TensorT<T>&, const Conv2dDims&);                  \
    template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, \
                                  std::int64_t, std::int64_t);                            \
    template std::pair<TensorT<T>, std::vector<std::int32_t>> maxpool2<T>(const TensorT<T>&); \
    template TensorT<T> relu<T>(const TensorT<T>&);                                       \
    template TensorT<T> affine<T>(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&); \
    template TensorT<T> flatten<T>(const TensorT<T>&);                                    \
    template double l2_loss<T>(const TensorT<T>&, const TensorT<T>&);                     \
    template TensorT<T> l2_loss_cotangent<T>(const TensorT<T>&, const TensorT<T>&);

LINTRAIN_INSTANTIATE_OPS(float)
LINTRAIN_INSTANTIATE_OPS(double)

} // namespace lintrain::ops
