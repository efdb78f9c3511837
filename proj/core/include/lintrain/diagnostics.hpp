#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lintrain/feature_matrix.hpp"
#include "lintrain/tangent.hpp"
#include "lintrain/tensor.hpp"

namespace lintrain::diagnostics {

/// G[i,j] = <row_i, row_j> of a dense row matrix, accumulated in 64-bit.
template <typename T>
TensorT<double> gram(const TensorT<T>& rows);

/// Gram matrix of the feature embedding, streamed in example blocks so the
/// full n x p matrix never has to exist; block size is chosen so one block
/// stays within `block_elems` elements.
template <typename T>
FeatureMatrixT<T> gram_of_embedding(const TangentModelT<T>& tm, const TensorT<T>& examples,
                                    std::int64_t block_elems);

struct EigResult {
    std::vector<double> values;   // descending
    TensorT<double> vectors;      // [n,n], column j pairs with values[j]; empty unless requested
};

/// Cyclic Jacobi rotations on a symmetric matrix until the off-diagonal
/// Frobenius norm drops below 1e-12 * ||G||_F. Throws on input that is not
/// symmetric to tolerance.
EigResult sym_eig(const TensorT<double>& matrix, bool want_vectors = false);

/// sqrt of eigenvalues of A*A^T, with negative rounding noise clamped to zero.
std::vector<double> singular_values_from_gram_eigs(std::span<const double> eigenvalues);

/// exp(Shannon entropy) of the normalized singular-value distribution,
/// restricted to strictly positive values. Scale invariant; between 1 and the
/// number of positive entries.
double effective_rank(std::span<const double> singular_values);

/// Composes the streamed Gram path, the eigensolver and the entropy measure.
template <typename T>
double effrank_of_embedding(const TangentModelT<T>& tm, const TensorT<T>& examples,
                            std::int64_t block_elems);

struct ProbeId {
    std::int64_t example_index = 0; // position in the probed split
    std::int64_t output_slot = 0;   // the correct-class output
};

/// Per-step probe-output records for one model's training run. Steps are
/// strictly increasing; values[s][p] pairs steps[s] with probes[p].
struct TrajectoryLog {
    std::string model_tag;
    std::vector<ProbeId> probes;
    std::vector<std::int64_t> steps;
    std::vector<std::vector<double>> values;
};

struct DivergenceResult {
    std::vector<double> per_probe_max;           // max_t |a_t - b_t|
    double max_over_probes = 0.0;
    std::vector<std::int64_t> first_step_over;   // -1 when never over threshold
    double threshold = 0.0;
};

/// Requires both logs to cover the same probes and steps.
DivergenceResult trajectory_divergence(const TrajectoryLog& a, const TrajectoryLog& b,
                                       double threshold);

struct MinNormSolution {
    std::vector<double> solution; // u*, length p
    double residual = 0.0;        // ||A u* - y||
};

/// Minimum-Euclidean-norm least squares via eigendecomposition of whichever
/// of A^T A and A A^T is smaller; singular values below 1e-10 * sigma_max are
/// treated as zero.
MinNormSolution minnorm_lsq(const TensorT<double>& a, std::span<const double> y);

} // namespace lintrain::diagnostics
