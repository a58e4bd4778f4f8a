#include "fedsim/dataset.hpp"

#include <stdexcept>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

void Dataset::validate() const {
    if (inputs.rank() != 2) {
        throw ShapeError("dataset inputs must be rank 2, got " + shape_to_string(inputs.shape));
    }
    if (inputs.dim(0) != labels.size()) {
        throw ConsistencyError("dataset has " + std::to_string(inputs.dim(0)) + " input rows but " +
                               std::to_string(labels.size()) + " labels");
    }
    if (num_classes < 2) throw std::invalid_argument("dataset needs at least 2 classes");
    for (int l : labels) {
        if (l < 0 || l >= num_classes) {
            throw std::invalid_argument("label " + std::to_string(l) + " outside [0, " +
                                        std::to_string(num_classes) + ")");
        }
    }
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (int l : labels) counts[static_cast<std::size_t>(l)]++;
    return counts;
}

void DatasetPartition::validate(const Dataset& parent) const {
    std::vector<char> seen(parent.size(), 0);
    for (std::size_t k = 0; k < client_indices.size(); ++k) {
        if (client_indices[k].empty()) {
            throw std::invalid_argument("partition client " + std::to_string(k) + " is empty");
        }
        for (int idx : client_indices[k]) {
            if (idx < 0 || static_cast<std::size_t>(idx) >= parent.size()) {
                throw std::invalid_argument("partition index " + std::to_string(idx) +
                                            " out of range");
            }
            if (seen[static_cast<std::size_t>(idx)]) {
                throw std::invalid_argument("partition index " + std::to_string(idx) +
                                            " assigned twice");
            }
            seen[static_cast<std::size_t>(idx)] = 1;
        }
    }
}

Tensor gather_inputs(const Dataset& data, const std::vector<int>& indices) {
    const std::size_t d = data.input_dim();
    Tensor out({indices.size(), d});
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const double* src = &data.inputs.data[static_cast<std::size_t>(indices[r]) * d];
        double* dst = &out.data[r * d];
        for (std::size_t c = 0; c < d; ++c) dst[c] = src[c];
    }
    return out;
}

}  // namespace fedsim
