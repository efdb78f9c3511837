#pragma once

#include <stdexcept>
#include <string>

namespace lintrain {

/// Base class for every error imposed by the library's contracts.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor extents do not line up (conv channels, affine dims, loss shapes, ...).
struct ShapeError : Error {
    using Error::Error;
};

/// A ParamVector's layout does not match the layout an operation expects.
struct LayoutError : Error {
    using Error::Error;
};

/// Invalid architecture description or experiment configuration.
struct ConfigError : Error {
    using Error::Error;
};

/// Malformed or truncated data file (bad magic, length mismatch, ...).
struct DataError : Error {
    using Error::Error;
};

/// An operation would exceed the configured element budget.
struct BudgetError : Error {
    using Error::Error;
};

/// Numeric failure: non-finite loss, degenerate spectrum, diverged solver.
struct NumericError : Error {
    using Error::Error;
};

/// File could not be opened or written.
struct IoError : Error {
    using Error::Error;
};

} // namespace lintrain
