#include "lintrain/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lintrain/ops.hpp"
#include "lintrain/rng.hpp"

namespace lintrain {

namespace {

// Empty tensors stand for structural zeros in the adjoint/tangent buffers.
template <typename T>
void add_into(TensorT<T>& acc, const TensorT<T>& g) {
    if (acc.empty()) {
        acc = g;
        return;
    }
    T* pa = acc.ptr();
    const T* pg = g.ptr();
    for (std::int64_t i = 0, e = acc.size(); i < e; ++i) pa[i] += pg[i];
}

template <typename T>
TensorT<T> column_sums(const TensorT<T>& m) {
    const std::int64_t rows = m.dim(0), cols = m.dim(1);
    TensorT<T> out({cols});
    const T* pm = m.ptr();
    T* po = out.ptr();
    for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j) po[j] += pm[i * cols + j];
    return out;
}

// [N,K,Ho,Wo] -> [(N*Ho*Wo), K], the row order im2col uses.
template <typename T>
TensorT<T> to_patch_rows(const TensorT<T>& g, const ops::Conv2dDims& d) {
    const std::int64_t plane = d.out_h * d.out_w;
    TensorT<T> m({d.batch * plane, d.out_channels});
    const T* pg = g.ptr();
    T* pm = m.ptr();
    for (std::int64_t n = 0; n < d.batch; ++n)
        for (std::int64_t k = 0; k < d.out_channels; ++k)
            for (std::int64_t s = 0; s < plane; ++s)
                pm[(n * plane + s) * d.out_channels + k] =
                    pg[(n * d.out_channels + k) * plane + s];
    return m;
}

// [(N*Ho*Wo), K] -> [N,K,Ho,Wo]
template <typename T>
TensorT<T> from_patch_rows(const TensorT<T>& m, const ops::Conv2dDims& d) {
    const std::int64_t plane = d.out_h * d.out_w;
    TensorT<T> g({d.batch, d.out_channels, d.out_h, d.out_w});
    const T* pm = m.ptr();
    T* pg = g.ptr();
    for (std::int64_t n = 0; n < d.batch; ++n)
        for (std::int64_t k = 0; k < d.out_channels; ++k)
            for (std::int64_t s = 0; s < plane; ++s)
                pg[(n * d.out_channels + k) * plane + s] =
                    pm[(n * plane + s) * d.out_channels + k];
    return g;
}

template <typename T>
ops::Conv2dDims dims_of(const GraphT<T>& graph, const GraphNode<T>& n) {
    return ops::conv2d_dims(graph.value(n.x).shape(), graph.value(n.w).shape(),
                            graph.value(n.b).shape(), n.stride, n.pad);
}

} // namespace

template <typename T>
ParamVectorT<T> vjp(const GraphT<T>& graph, const TensorT<T>& cotangent) {
    if (graph.output_id() < 0) throw Error("vjp: graph has no output");
    if (!cotangent.same_shape(graph.output()))
        throw ShapeError("vjp: cotangent shape does not match output");

    std::vector<TensorT<T>> adj(static_cast<std::size_t>(graph.node_count()));
    adj[static_cast<std::size_t>(graph.output_id())] = cotangent;

    for (int id = graph.node_count() - 1; id >= 0; --id) {
        const TensorT<T>& g = adj[static_cast<std::size_t>(id)];
        if (g.empty()) continue;
        const GraphNode<T>& n = graph.node(id);
        switch (n.kind) {
        case OpKind::Input:
        case OpKind::Param:
            break;
        case OpKind::Conv2d: {
            const ops::Conv2dDims d = dims_of(graph, n);
            const std::int64_t patch_cols = d.in_channels * d.kernel_h * d.kernel_w;
            const TensorT<T> gmat = to_patch_rows(g, d);
            add_into(adj[static_cast<std::size_t>(n.b)], column_sums(gmat));
            const TensorT<T> patches = ops::im2col(graph.value(n.x), d);
            add_into(adj[static_cast<std::size_t>(n.w)],
                     ops::matmul_tn(gmat, patches)
                         .reshaped({d.out_channels, d.in_channels, d.kernel_h, d.kernel_w}));
            const TensorT<T> kmat = graph.value(n.w).reshaped({d.out_channels, patch_cols});
            add_into(adj[static_cast<std::size_t>(n.x)],
                     ops::col2im(ops::matmul_nn(gmat, kmat), d));
            break;
        }
        case OpKind::MaxPool2: {
            const TensorT<T>& x = graph.value(n.x);
            TensorT<T> gx(x.shape());
            const std::int64_t h = x.dim(2), w = x.dim(3);
            const std::int64_t oh = h / 2, ow = w / 2;
            const T* pg = g.ptr();
            T* px = gx.ptr();
            std::int64_t oi = 0;
            for (std::int64_t nc = 0; nc < x.dim(0) * x.dim(1); ++nc) {
                T* plane = px + nc * h * w;
                for (std::int64_t oy = 0; oy < oh; ++oy)
                    for (std::int64_t ox = 0; ox < ow; ++ox, ++oi) {
                        const std::int32_t s = n.argmax[static_cast<std::size_t>(oi)];
                        const std::int64_t iy = 2 * oy + s / 2;
                        const std::int64_t ix = 2 * ox + s % 2;
                        plane[iy * w + ix] += pg[oi];
                    }
            }
            add_into(adj[static_cast<std::size_t>(n.x)], gx);
            break;
        }
        case OpKind::Relu: {
            const TensorT<T>& x = graph.value(n.x);
            TensorT<T> gx(x.shape());
            const T* px = x.ptr();
            const T* pg = g.ptr();
            T* po = gx.ptr();
            for (std::int64_t i = 0, e = x.size(); i < e; ++i)
                po[i] = px[i] > T(0) ? pg[i] : T(0);
            add_into(adj[static_cast<std::size_t>(n.x)], gx);
            break;
        }
        case OpKind::Affine: {
            add_into(adj[static_cast<std::size_t>(n.x)], ops::matmul_nt(g, graph.value(n.w)));
            add_into(adj[static_cast<std::size_t>(n.w)], ops::matmul_tn(graph.value(n.x), g));
            add_into(adj[static_cast<std::size_t>(n.b)], column_sums(g));
            break;
        }
        case OpKind::Flatten: {
            add_into(adj[static_cast<std::size_t>(n.x)],
                     g.reshaped(graph.value(n.x).shape()));
            break;
        }
        }
    }

    ParamVectorT<T> grad(graph.layout());
    const auto& ids = graph.param_ids();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const TensorT<T>& a = adj[static_cast<std::size_t>(ids[i])];
        if (a.empty()) continue; // output independent of this leaf
        auto dst = grad.slice(i);
        const T* src = a.ptr();
        std::copy(src, src + dst.size(), dst.begin());
    }
    return grad;
}

template <typename T>
TensorT<T> jvp(const GraphT<T>& graph, const ParamVectorT<T>& tangent) {
    if (graph.output_id() < 0) throw Error("jvp: graph has no output");
    if (!same_layout(tangent.layout(), graph.layout()))
        throw LayoutError("jvp: tangent layout does not match graph parameters");

    std::vector<TensorT<T>> tan(static_cast<std::size_t>(graph.node_count()));
    const auto& ids = graph.param_ids();
    for (std::size_t i = 0; i < ids.size(); ++i)
        tan[static_cast<std::size_t>(ids[i])] = tangent.entry_tensor(i);

    for (int id = 0; id < graph.node_count(); ++id) {
        const GraphNode<T>& n = graph.node(id);
        TensorT<T>& out = tan[static_cast<std::size_t>(id)];
        switch (n.kind) {
        case OpKind::Input:
        case OpKind::Param:
            break;
        case OpKind::Conv2d: {
            const ops::Conv2dDims d = dims_of(graph, n);
            const std::int64_t patch_cols = d.in_channels * d.kernel_h * d.kernel_w;
            const TensorT<T>& tx = tan[static_cast<std::size_t>(n.x)];
            const TensorT<T>& tw = tan[static_cast<std::size_t>(n.w)];
            const TensorT<T>& tb = tan[static_cast<std::size_t>(n.b)];
            TensorT<T> raw;
            if (!tx.empty()) {
                const TensorT<T> kmat = graph.value(n.w).reshaped({d.out_channels, patch_cols});
                raw = ops::matmul_nt(ops::im2col(tx, d), kmat);
            }
            if (!tw.empty()) {
                const TensorT<T> tkmat = tw.reshaped({d.out_channels, patch_cols});
                add_into(raw, ops::matmul_nt(ops::im2col(graph.value(n.x), d), tkmat));
            }
            if (raw.empty() && tb.empty()) break;
            if (raw.empty())
                raw = TensorT<T>({d.batch * d.out_h * d.out_w, d.out_channels});
            if (!tb.empty()) {
                const std::int64_t rows = raw.dim(0);
                T* pr = raw.ptr();
                const T* pb = tb.ptr();
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t k = 0; k < d.out_channels; ++k)
                        pr[r * d.out_channels + k] += pb[k];
            }
            out = from_patch_rows(raw, d);
            break;
        }
        case OpKind::MaxPool2: {
            const TensorT<T>& tx = tan[static_cast<std::size_t>(n.x)];
            if (tx.empty()) break;
            const TensorT<T>& x = graph.value(n.x);
            const std::int64_t h = x.dim(2), w = x.dim(3);
            const std::int64_t oh = h / 2, ow = w / 2;
            TensorT<T> t(n.value.shape());
            const T* ptx = tx.ptr();
            T* pt = t.ptr();
            std::int64_t oi = 0;
            for (std::int64_t nc = 0; nc < x.dim(0) * x.dim(1); ++nc) {
                const T* plane = ptx + nc * h * w;
                for (std::int64_t oy = 0; oy < oh; ++oy)
                    for (std::int64_t ox = 0; ox < ow; ++ox, ++oi) {
                        const std::int32_t s = n.argmax[static_cast<std::size_t>(oi)];
                        pt[oi] = plane[(2 * oy + s / 2) * w + (2 * ox + s % 2)];
                    }
            }
            out = std::move(t);
            break;
        }
        case OpKind::Relu: {
            const TensorT<T>& tx = tan[static_cast<std::size_t>(n.x)];
            if (tx.empty()) break;
            const TensorT<T>& x = graph.value(n.x);
            TensorT<T> t(x.shape());
            const T* px = x.ptr();
            const T* ptx = tx.ptr();
            T* pt = t.ptr();
            for (std::int64_t i = 0, e = x.size(); i < e; ++i)
                pt[i] = px[i] > T(0) ? ptx[i] : T(0);
            out = std::move(t);
            break;
        }
        case OpKind::Affine: {
            const TensorT<T>& tx = tan[static_cast<std::size_t>(n.x)];
            const TensorT<T>& tw = tan[static_cast<std::size_t>(n.w)];
            const TensorT<T>& tb = tan[static_cast<std::size_t>(n.b)];
            TensorT<T> t;
            if (!tx.empty()) t = ops::matmul_nn(tx, graph.value(n.w));
            if (!tw.empty()) add_into(t, ops::matmul_nn(graph.value(n.x), tw));
            if (t.empty() && tb.empty()) break;
            if (t.empty()) t = TensorT<T>(n.value.shape());
            if (!tb.empty()) {
                const std::int64_t rows = t.dim(0), cols = t.dim(1);
                T* pt = t.ptr();
                const T* pb = tb.ptr();
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < cols; ++j) pt[r * cols + j] += pb[j];
            }
            out = std::move(t);
            break;
        }
        case OpKind::Flatten: {
            const TensorT<T>& tx = tan[static_cast<std::size_t>(n.x)];
            if (tx.empty()) break;
            out = tx.reshaped(n.value.shape());
            break;
        }
        }
    }

    TensorT<T>& t = tan[static_cast<std::size_t>(graph.output_id())];
    if (t.empty()) return TensorT<T>(graph.output().shape());
    return std::move(t);
}

namespace {

double scalarize(const GraphT<double>& graph, const TensorT<double>& cotangent) {
    const TensorT<double>& out = graph.output();
    double acc = 0.0;
    const double* pc = cotangent.ptr();
    const double* po = out.ptr();
    for (std::int64_t i = 0, e = out.size(); i < e; ++i) acc += pc[i] * po[i];
    return acc;
}

} // namespace

double grad_check(const GraphT<double>& graph, const TensorT<double>& cotangent,
                  double step, std::int64_t sample_count, std::uint64_t seed) {
    const ParamVectorT<double> analytic = vjp(graph, cotangent);
    const ParamLayoutPtr layout = graph.layout();
    const std::int64_t p = layout->total();

    std::vector<std::int64_t> coords(static_cast<std::size_t>(p));
    std::iota(coords.begin(), coords.end(), 0);
    if (sample_count < p) {
        Xoshiro256 rng(seed);
        for (std::int64_t i = 0; i < sample_count; ++i) {
            const std::int64_t j =
                i + static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(p - i)));
            std::swap(coords[static_cast<std::size_t>(i)], coords[static_cast<std::size_t>(j)]);
        }
        coords.resize(static_cast<std::size_t>(sample_count));
    }

    GraphT<double> work = graph;
    double worst = 0.0;
    for (const std::int64_t coord : coords) {
        // locate the entry holding this flat coordinate
        std::size_t ei = 0;
        while (ei + 1 < layout->entry_count() && layout->entry(ei + 1).offset <= coord) ++ei;
        const std::int64_t local = coord - layout->entry(ei).offset;
        const int node_id = work.param_ids()[ei];

        const TensorT<double> original = work.value(node_id);
        auto eval_at = [&](double delta) {
            TensorT<double> perturbed = original;
            perturbed[local] += delta;
            work.set_leaf(node_id, std::move(perturbed));
            work.replay();
            return scalarize(work, cotangent);
        };
        const double plus = eval_at(step);
        const double minus = eval_at(-step);
        work.set_leaf(node_id, original);

        const double numeric = (plus - minus) / (2.0 * step);
        const double exact = analytic[coord];
        const double denom = std::max({std::fabs(exact), std::fabs(numeric), 1e-8});
        worst = std::max(worst, std::fabs(exact - numeric) / denom);
    }
    return worst;
}

template ParamVectorT<float> vjp<float>(const GraphT<float>&, const TensorT<float>&);
template ParamVectorT<double> vjp<double>(const GraphT<double>&, const TensorT<double>&);
template TensorT<float> jvp<float>(const GraphT<float>&, const ParamVectorT<float>&);
template TensorT<double> jvp<double>(const GraphT<double>&, const ParamVectorT<double>&);

} // namespace lintrain
