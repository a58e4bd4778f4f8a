#pragma once

#include <cstddef>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

// One client's round output: updated parameters plus the variance estimate
// captured from the Adam second moment during local training.
struct ClientUpdate {
    int client_id = 0;
    std::size_t sample_count = 0;  // n_k
    ModelParams params;
    VarianceEstimate variance;
};

/// Sample-size-weighted mean: w = sum_k (n_k / n) w^k over the participating
/// clients. Weights are normalized within the call, so a single update is
/// returned bit-exactly.
ModelParams aggregate_fedavg(const std::vector<ClientUpdate>& updates);

/// Inverse-variance (precision) weighted mean, elementwise: for every scalar
/// position j,
///   w[j] = sum_k (v^k[j]+eps)^-1 w^k[j] / sum_k (v^k[j]+eps)^-1.
/// eps regularizes zero variances. Throws std::invalid_argument on negative
/// variance entries.
ModelParams aggregate_precision_weighted(const std::vector<ClientUpdate>& updates, double eps);

}  // namespace fedsim
