#include "lintrain/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lintrain/errors.hpp"
#include "lintrain/ops.hpp"
#include "lintrain/parallel.hpp"

namespace lintrain::diagnostics {

namespace {

// Accumulates C[i,j] += <rows_a[i,:], rows_b[j,:]> in 64-bit, k ascending.
// Chunked over k for cache reuse; the per-element accumulation order matches
// the plain loop. Parallel over (i) tiles: disjoint output rows.
template <typename T>
void gram_block(const TensorT<T>& rows_a, const TensorT<T>& rows_b, TensorT<double>& out,
                std::int64_t row_off_a, std::int64_t row_off_b) {
    const std::int64_t ra = rows_a.dim(0), rb = rows_b.dim(0), p = rows_a.dim(1);
    if (rows_b.dim(1) != p) throw ShapeError("gram: row-length mismatch");
    const std::int64_t n = out.dim(0);
    const std::int64_t chunk = 4096;
    const T* pa = rows_a.ptr();
    const T* pb = rows_b.ptr();
    double* po = out.ptr();
    parallel_for(0, ra, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t k0 = 0; k0 < p; k0 += chunk) {
            const std::int64_t k1 = std::min(p, k0 + chunk);
            for (std::int64_t i = i0; i < i1; ++i) {
                const T* arow = pa + i * p;
                for (std::int64_t j = 0; j < rb; ++j) {
                    const T* brow = pb + j * p;
                    double acc = 0.0;
                    for (std::int64_t k = k0; k < k1; ++k)
                        acc += static_cast<double>(arow[k]) * static_cast<double>(brow[k]);
                    po[(row_off_a + i) * n + (row_off_b + j)] += acc;
                }
            }
        }
    });
}

void mirror_lower(TensorT<double>& g) {
    const std::int64_t n = g.dim(0);
    double* p = g.ptr();
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = i + 1; j < n; ++j) p[j * n + i] = p[i * n + j];
}

} // namespace

template <typename T>
TensorT<double> gram(const TensorT<T>& rows) {
    if (rows.rank() != 2) throw ShapeError("gram: expected a [n,p] row matrix");
    const std::int64_t n = rows.dim(0);
    TensorT<double> g({n, n});
    gram_block(rows, rows, g, 0, 0);
    // keep the matrix exactly symmetric: the upper triangle is authoritative
    mirror_lower(g);
    return g;
}

template <typename T>
FeatureMatrixT<T> gram_of_embedding(const TangentModelT<T>& tm, const TensorT<T>& examples,
                                    std::int64_t block_elems) {
    const std::int64_t m = examples.dim(0);
    const std::int64_t outputs = tm.spec.num_classes;
    const std::int64_t p = tm.w0.size();
    const std::int64_t n = m * outputs;
    if (n * n > block_elems)
        throw BudgetError("gram_of_embedding: " + std::to_string(n) + "x" + std::to_string(n) +
                          " Gram exceeds the element budget");
    const std::int64_t ex_per_block =
        std::clamp<std::int64_t>(block_elems / (p * outputs), 1, m);

    FeatureMatrixT<T> fm;
    fm.kind = FeatureMatrixT<T>::Kind::Gram;
    fm.examples = m;
    fm.outputs = outputs;
    fm.width_factor = tm.spec.width_factor;
    fm.gram = TensorT<double>({n, n});

    for (std::int64_t bi = 0; bi < m; bi += ex_per_block) {
        const std::int64_t bi_end = std::min(m, bi + ex_per_block);
        const TensorT<T> rows_i = embed_rows(tm, examples, bi, bi_end);
        gram_block(rows_i, rows_i, fm.gram, bi * outputs, bi * outputs);
        for (std::int64_t bj = bi_end; bj < m; bj += ex_per_block) {
            const std::int64_t bj_end = std::min(m, bj + ex_per_block);
            const TensorT<T> rows_j = embed_rows(tm, examples, bj, bj_end);
            gram_block(rows_i, rows_j, fm.gram, bi * outputs, bj * outputs);
        }
    }
    mirror_lower(fm.gram);
    return fm;
}

EigResult sym_eig(const TensorT<double>& matrix, bool want_vectors) {
    if (matrix.rank() != 2 || matrix.dim(0) != matrix.dim(1))
        throw ShapeError("sym_eig: matrix must be square");
    const std::int64_t n = matrix.dim(0);

    double max_abs = 0.0, max_asym = 0.0;
    {
        const double* p = matrix.ptr();
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < n; ++j) {
                max_abs = std::max(max_abs, std::fabs(p[i * n + j]));
                max_asym = std::max(max_asym, std::fabs(p[i * n + j] - p[j * n + i]));
            }
    }
    if (max_asym > 1e-9 * std::max(1.0, max_abs))
        throw NumericError("sym_eig: input is not symmetric to tolerance");

    // work on the symmetrized copy; exact for exactly symmetric input
    TensorT<double> work(matrix.shape());
    {
        const double* src = matrix.ptr();
        double* dst = work.ptr();
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < n; ++j)
                dst[i * n + j] = 0.5 * (src[i * n + j] + src[j * n + i]);
    }
    double* a = work.ptr();

    TensorT<double> vectors;
    double* v = nullptr;
    if (want_vectors) {
        vectors = TensorT<double>({n, n});
        v = vectors.ptr();
        for (std::int64_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    }

    double frob = 0.0;
    for (std::int64_t i = 0; i < n * n; ++i) frob += a[i] * a[i];
    frob = std::sqrt(frob);
    const double off_target = 1e-12 * frob;

    const int max_sweeps = 64;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = i + 1; j < n; ++j) off += 2.0 * a[i * n + j] * a[i * n + j];
        off = std::sqrt(off);
        if (off <= off_target || off == 0.0) break;

        for (std::int64_t p = 0; p < n - 1; ++p) {
            for (std::int64_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0)
                                     ? 1.0 / (theta + std::sqrt(theta * theta + 1.0))
                                     : 1.0 / (theta - std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;

                double* rowp = a + p * n;
                double* rowq = a + q * n;
                for (std::int64_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = rowp[r];
                    const double arq = rowq[r];
                    rowp[r] = arp - s * (arq + tau * arp);
                    rowq[r] = arq + s * (arp - tau * arq);
                    a[r * n + p] = rowp[r];
                    a[r * n + q] = rowq[r];
                }
                if (v) {
                    for (std::int64_t r = 0; r < n; ++r) {
                        const double vrp = v[r * n + p];
                        const double vrq = v[r * n + q];
                        v[r * n + p] = vrp - s * (vrq + tau * vrp);
                        v[r * n + q] = vrq + s * (vrp - tau * vrq);
                    }
                }
            }
        }
    }
    if (sweep == max_sweeps)
        throw NumericError("sym_eig: Jacobi sweeps did not converge");

    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t x, std::int64_t y) {
        return a[x * n + x] > a[y * n + y];
    });

    EigResult result;
    result.values.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        result.values[static_cast<std::size_t>(i)] = a[order[static_cast<std::size_t>(i)] * n +
                                                       order[static_cast<std::size_t>(i)]];
    if (want_vectors) {
        result.vectors = TensorT<double>({n, n});
        double* dst = result.vectors.ptr();
        for (std::int64_t j = 0; j < n; ++j) {
            const std::int64_t src_col = order[static_cast<std::size_t>(j)];
            for (std::int64_t r = 0; r < n; ++r) dst[r * n + j] = v[r * n + src_col];
        }
    }
    return result;
}

std::vector<double> singular_values_from_gram_eigs(std::span<const double> eigenvalues) {
    std::vector<double> sigma(eigenvalues.size());
    for (std::size_t i = 0; i < eigenvalues.size(); ++i)
        sigma[i] = eigenvalues[i] > 0.0 ? std::sqrt(eigenvalues[i]) : 0.0;
    return sigma;
}

double effective_rank(std::span<const double> singular_values) {
    double total = 0.0;
    for (const double s : singular_values) {
        if (s < 0.0) throw NumericError("effective_rank: negative singular value");
        total += s;
    }
    if (total <= 0.0) throw NumericError("effective_rank: all singular values are zero");
    double entropy = 0.0;
    for (const double s : singular_values) {
        if (s <= 0.0) continue; // 0*ln(0) := 0
        const double p = s / total;
        entropy -= p * std::log(p);
    }
    return std::exp(entropy);
}

template <typename T>
double effrank_of_embedding(const TangentModelT<T>& tm, const TensorT<T>& examples,
                            std::int64_t block_elems) {
    const FeatureMatrixT<T> fm = gram_of_embedding(tm, examples, block_elems);
    const EigResult eig = sym_eig(fm.gram, /*want_vectors=*/false);
    const std::vector<double> sigma = singular_values_from_gram_eigs(eig.values);
    return effective_rank(sigma);
}

DivergenceResult trajectory_divergence(const TrajectoryLog& a, const TrajectoryLog& b,
                                       double threshold) {
    if (a.steps != b.steps) throw Error("trajectory_divergence: step grids differ");
    if (a.probes.size() != b.probes.size())
        throw Error("trajectory_divergence: probe sets differ");
    for (std::size_t i = 0; i < a.probes.size(); ++i)
        if (a.probes[i].example_index != b.probes[i].example_index ||
            a.probes[i].output_slot != b.probes[i].output_slot)
            throw Error("trajectory_divergence: probe sets differ");

    DivergenceResult result;
    result.threshold = threshold;
    result.per_probe_max.assign(a.probes.size(), 0.0);
    result.first_step_over.assign(a.probes.size(), -1);
    for (std::size_t s = 0; s < a.steps.size(); ++s) {
        for (std::size_t p = 0; p < a.probes.size(); ++p) {
            const double dev = std::fabs(a.values[s][p] - b.values[s][p]);
            result.per_probe_max[p] = std::max(result.per_probe_max[p], dev);
            if (dev > threshold && result.first_step_over[p] < 0)
                result.first_step_over[p] = a.steps[s];
        }
    }
    for (const double d : result.per_probe_max)
        result.max_over_probes = std::max(result.max_over_probes, d);
    return result;
}

namespace {

std::vector<double> matvec(const TensorT<double>& m, std::span<const double> x) {
    const std::int64_t rows = m.dim(0), cols = m.dim(1);
    std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
    const double* pm = m.ptr();
    for (std::int64_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < cols; ++j) acc += pm[i * cols + j] * x[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

std::vector<double> matvec_t(const TensorT<double>& m, std::span<const double> x) {
    const std::int64_t rows = m.dim(0), cols = m.dim(1);
    std::vector<double> out(static_cast<std::size_t>(cols), 0.0);
    const double* pm = m.ptr();
    for (std::int64_t i = 0; i < rows; ++i) {
        const double xi = x[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < cols; ++j) out[static_cast<std::size_t>(j)] += pm[i * cols + j] * xi;
    }
    return out;
}

} // namespace

MinNormSolution minnorm_lsq(const TensorT<double>& a, std::span<const double> y) {
    if (a.rank() != 2) throw ShapeError("minnorm_lsq: A must be [n,p]");
    const std::int64_t n = a.dim(0), p = a.dim(1);
    if (static_cast<std::int64_t>(y.size()) != n)
        throw ShapeError("minnorm_lsq: y length must match rows of A");

    MinNormSolution result;
    // relative cutoff on singular values: sigma <= 1e-10 * sigma_max drops out
    const auto lambda_cutoff = [](const std::vector<double>& eigs) {
        const double lmax = eigs.empty() ? 0.0 : std::max(eigs.front(), 0.0);
        return lmax * 1e-20;
    };

    if (n <= p) {
        const TensorT<double> g = gram(a); // A A^T
        const EigResult eig = sym_eig(g, /*want_vectors=*/true);
        const double cut = lambda_cutoff(eig.values);
        const std::vector<double> z = matvec_t(eig.vectors, y); // Q^T y
        std::vector<double> w(z.size(), 0.0);
        for (std::size_t i = 0; i < z.size(); ++i)
            if (eig.values[i] > cut && eig.values[i] > 0.0) w[i] = z[i] / eig.values[i];
        const std::vector<double> lift = matvec(eig.vectors, w); // Q w
        result.solution = matvec_t(a, lift);                     // A^T (Q w)
    } else {
        const TensorT<double> m = ops::matmul_tn(a, a); // A^T A
        const EigResult eig = sym_eig(m, /*want_vectors=*/true);
        const double cut = lambda_cutoff(eig.values);
        const std::vector<double> b = matvec_t(a, y);            // A^T y
        const std::vector<double> z = matvec_t(eig.vectors, b);  // V^T b
        std::vector<double> w(z.size(), 0.0);
        for (std::size_t i = 0; i < z.size(); ++i)
            if (eig.values[i] > cut && eig.values[i] > 0.0) w[i] = z[i] / eig.values[i];
        result.solution = matvec(eig.vectors, w); // V w
    }

    const std::vector<double> fitted = matvec(a, result.solution);
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double r = fitted[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)];
        acc += r * r;
    }
    result.residual = std::sqrt(acc);
    return result;
}

#define LINTRAIN_INSTANTIATE_DIAG(T)                                                       \
    template TensorT<double> gram<T>(const TensorT<T>&);                                   \
    template FeatureMatrixT<T> gram_of_embedding<T>(const TangentModelT<T>&,               \
                                                    const TensorT<T>&, std::int64_t);      \
    template double effrank_of_embedding<T>(const TangentModelT<T>&, const TensorT<T>&,    \
                                            std::int64_t);

LINTRAIN_INSTANTIATE_DIAG(float)
LINTRAIN_INSTANTIATE_DIAG(double)

} // namespace lintrain::diagnostics
