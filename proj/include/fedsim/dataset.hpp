#pragma once

#include <vector>

#include "fedsim/tensor.hpp"

namespace fedsim {

// Labelled classification data. inputs is (n, input_dim); labels holds class
// indices in [0, num_classes).
struct Dataset {
    Tensor inputs;
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t input_dim() const { return inputs.rank() == 2 ? inputs.dim(1) : 0; }

    /// Row count / label count / label range consistency; throws on violation.
    void validate() const;

    /// Per-class sample counts.
    std::vector<std::size_t> class_counts() const;
};

// Disjoint index lists into a parent dataset, one per client.
struct DatasetPartition {
    std::vector<std::vector<int>> client_indices;

    std::size_t num_clients() const { return client_indices.size(); }

    /// Disjointness, index validity and non-emptiness against `parent`.
    void validate(const Dataset& parent) const;
};

/// Rows of `data` selected by `indices`, materialized as (k, input_dim).
Tensor gather_inputs(const Dataset& data, const std::vector<int>& indices);

}  // namespace fedsim
