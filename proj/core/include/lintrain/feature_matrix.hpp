#pragma once

#include <cstdint>

#include "lintrain/tensor.hpp"

namespace lintrain {

/// Feature embedding of a set of examples: either the dense matrix A whose
/// row (i*L + l) is the gradient of output l at example i, or its Gram matrix
/// G = A*A^T (always 64-bit) when p is too large to materialize A. Carries
/// provenance so downstream CSVs can echo where the spectrum came from.
template <typename T>
struct FeatureMatrixT {
    enum class Kind { Dense, Gram };

    Kind kind = Kind::Dense;
    TensorT<T> dense;       // [n, p], example-major rows
    TensorT<double> gram;   // [n, n]
    std::int64_t examples = 0; // m
    std::int64_t outputs = 0;  // L; n = L*m
    std::int64_t width_factor = 1;
    std::uint64_t seed = 0;

    std::int64_t rows() const { return examples * outputs; }
};

} // namespace lintrain
