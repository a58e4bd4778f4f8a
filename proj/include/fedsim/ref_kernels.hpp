#pragma once

#include <vector>

#include "fedsim/aggregate.hpp"
#include "fedsim/mlp.hpp"

// Serial reference implementations of the hot kernels. These are kept
// deliberately naive: tests use them as independent oracles for the OpenMP
// paths and the benchmark target compares against them. Nothing here may
// call into the parallel implementations.
namespace fedsim::ref {

/// Straight-line forward pass (no OpenMP, no blocking).
Tensor forward(const ModelParams& params, const MlpArchitecture& arch, const Tensor& inputs);

/// Mean categorical cross-entropy of probability rows against class labels.
double mean_cross_entropy(const Tensor& probabilities, const std::vector<int>& labels);

/// FedAvg as the literal formula: sum_k (n_k / n) w^k, one nested loop.
ModelParams aggregate_fedavg(const std::vector<ClientUpdate>& updates);

/// Precision weighting as the literal formula:
/// sum_k (v+eps)^-1 w / sum_k (v+eps)^-1, accumulated per scalar.
ModelParams aggregate_precision_weighted(const std::vector<ClientUpdate>& updates, double eps);

}  // namespace fedsim::ref
