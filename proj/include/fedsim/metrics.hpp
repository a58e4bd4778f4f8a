#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/mlp.hpp"

namespace fedsim {

/// Top-1 accuracy on test_set; argmax ties broken by lowest class index.
double test_accuracy(const ModelParams& params, const MlpArchitecture& arch,
                     const Dataset& test_set);

struct Evaluation {
    double accuracy = 0.0;
    double loss = 0.0;
};

/// Accuracy and mean cross-entropy in one forward pass.
Evaluation evaluate(const ModelParams& params, const MlpArchitecture& arch,
                    const Dataset& test_set);

/// Reliability index xi(%) = (1 - sigma/mu) * 100 from precomputed stats.
double reliability_index_from_stats(double mean, double stddev);

/// Reliability index of an accuracy series; sigma is the sample standard
/// deviation (n-1 denominator). Requires >= 2 values and positive mean.
double reliability_index(const std::vector<double>& accuracies);

/// Arithmetic mean of per-configuration reliability indices.
double overall_reliability(const std::vector<double>& per_config);

struct ReliabilityReport {
    std::vector<std::pair<std::string, double>> per_config;
    double overall = 0.0;
};

/// Smallest round index whose test_accuracy reaches `target`; nullopt if the
/// target is never reached. Records must be ordered by round.
std::optional<int> rounds_to_target(const std::vector<RoundRecord>& records, double target);

/// rounds_baseline / rounds_method as a real ratio; nullopt if either side
/// never reached the target.
std::optional<double> speedup(std::optional<int> rounds_baseline, std::optional<int> rounds_method);

// Inverse-variance summaries of a per-round update history: the per-client
// mean of (v+eps)^-1 over all scalar positions round by round, plus the
// per-layer view at round 1. Normalized series are min-max scaled to [0,1]
// (a constant series maps to all zeros).
struct VarianceAnalysis {
    std::vector<int> client_ids;
    // [round][client slot]; NaN where the client did not participate.
    std::vector<std::vector<double>> mean_inv_variance;
    std::vector<std::vector<double>> normalized;  // per client slot, across rounds
    std::vector<std::string> layer_names;
    // [layer][client slot] at round 1; NaN for round-1 absentees.
    std::vector<std::vector<double>> round1_per_layer;
    std::vector<std::vector<double>> round1_per_layer_normalized;  // global min-max
};

VarianceAnalysis variance_analysis(const std::vector<std::vector<ClientUpdate>>& updates_per_round,
                                   double eps);

/// Mean over every scalar position of (v+eps)^-1 for one update.
double mean_inverse_variance(const VarianceEstimate& variance, double eps);

}  // namespace fedsim
