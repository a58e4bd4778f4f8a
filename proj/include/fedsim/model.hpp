#pragma once

#include <string>
#include <vector>

#include "fedsim/tensor.hpp"

namespace fedsim {

// Ordered collection of named parameter tensors; the object exchanged
// between clients and server. Entry order is the canonical serialization
// order and part of structure compatibility.
struct ModelParams {
    struct Entry {
        std::string name;
        Tensor tensor;
    };
    std::vector<Entry> entries;

    std::size_t scalar_count() const;
    const Tensor* find(const std::string& name) const;

    /// Validates unique names; throws std::invalid_argument on duplicates.
    void validate_names() const;
};

/// True iff names, order and shapes all match.
bool structure_compatible(const ModelParams& a, const ModelParams& b);

/// Throws ShapeError naming the context when a and b are incompatible.
void require_compatible(const ModelParams& a, const ModelParams& b, const std::string& context);

/// Same structure as `like`, every tensor zero-filled.
ModelParams zeros_like(const ModelParams& like);

/// Per-parameter second-moment summary; structure-compatible with the model
/// it was captured from, entries all >= 0.
struct VarianceEstimate {
    ModelParams values;
};

}  // namespace fedsim
