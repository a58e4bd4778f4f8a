#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Error taxonomy used across the library. Callers that need to react to a
// specific failure mode catch the concrete type; everything derives from
// std::runtime_error so generic handlers keep working.

/// Structure mismatch between tensors or parameter sets.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite value encountered where finiteness is required.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed on-disk data (wrong magic, bad field).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Mutually inconsistent inputs (e.g. image/label count mismatch).
struct ConsistencyError : std::runtime_error {
    explicit ConsistencyError(const std::string& what) : std::runtime_error(what) {}
};

/// I/O failure (unreadable, truncated, unwritable).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedsim
