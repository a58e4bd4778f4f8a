#include "fedsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fedsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t argmax_row(const Tensor& probs, std::size_t row) {
    // Strict comparison keeps the lowest index on ties.
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.dim(1); ++c) {
        if (probs.at(row, c) > probs.at(row, best)) best = c;
    }
    return best;
}

}  // namespace

Evaluation evaluate(const ModelParams& params, const MlpArchitecture& arch,
                    const Dataset& test_set) {
    test_set.validate();
    if (test_set.size() == 0) throw std::invalid_argument("evaluate: empty test set");
    const Tensor probs = forward(params, arch, test_set.inputs);

    std::size_t correct = 0;
    double loss = 0.0;
    for (std::size_t r = 0; r < test_set.size(); ++r) {
        const std::size_t label = static_cast<std::size_t>(test_set.labels[r]);
        if (argmax_row(probs, r) == label) ++correct;
        loss -= std::log(std::max(probs.at(r, label), 1e-300));
    }
    Evaluation out;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(test_set.size());
    out.loss = loss / static_cast<double>(test_set.size());
    return out;
}

double test_accuracy(const ModelParams& params, const MlpArchitecture& arch,
                     const Dataset& test_set) {
    return evaluate(params, arch, test_set).accuracy;
}

double reliability_index_from_stats(double mean, double stddev) {
    if (!(mean > 0.0)) throw std::domain_error("reliability_index: mean must be positive");
    return (1.0 - stddev / mean) * 100.0;
}

double reliability_index(const std::vector<double>& accuracies) {
    if (accuracies.size() < 2) {
        throw std::invalid_argument("reliability_index: need at least two values");
    }
    double mean = 0.0;
    for (double a : accuracies) mean += a;
    mean /= static_cast<double>(accuracies.size());
    double ss = 0.0;
    for (double a : accuracies) ss += (a - mean) * (a - mean);
    // Sample standard deviation (n-1 denominator).
    const double stddev = std::sqrt(ss / static_cast<double>(accuracies.size() - 1));
    return reliability_index_from_stats(mean, stddev);
}

double overall_reliability(const std::vector<double>& per_config) {
    if (per_config.empty()) throw std::invalid_argument("overall_reliability: empty input");
    double sum = 0.0;
    for (double x : per_config) sum += x;
    return sum / static_cast<double>(per_config.size());
}

std::optional<int> rounds_to_target(const std::vector<RoundRecord>& records, double target) {
    for (const auto& rec : records) {
        if (rec.test_accuracy >= target) return rec.round;
    }
    return std::nullopt;
}

std::optional<double> speedup(std::optional<int> rounds_baseline, std::optional<int> rounds_method) {
    if (!rounds_baseline.has_value() || !rounds_method.has_value()) return std::nullopt;
    if (*rounds_baseline < 1 || *rounds_method < 1) {
        throw std::invalid_argument("speedup: round counts must be >= 1");
    }
    return static_cast<double>(*rounds_baseline) / static_cast<double>(*rounds_method);
}

double mean_inverse_variance(const VarianceEstimate& variance, double eps) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& e : variance.values.entries) {
        for (double v : e.tensor.data) acc += 1.0 / (v + eps);
        count += e.tensor.size();
    }
    if (count == 0) throw std::invalid_argument("mean_inverse_variance: empty estimate");
    return acc / static_cast<double>(count);
}

namespace {

// Min-max over non-NaN values; min==max collapses to 0 (documented degenerate
// convention so constant series do not divide by zero).
std::vector<double> minmax_normalize(const std::vector<double>& series) {
    double lo = kNaN, hi = kNaN;
    for (double v : series) {
        if (std::isnan(v)) continue;
        if (std::isnan(lo) || v < lo) lo = v;
        if (std::isnan(hi) || v > hi) hi = v;
    }
    std::vector<double> out(series.size(), kNaN);
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (std::isnan(series[i])) continue;
        out[i] = (hi > lo) ? (series[i] - lo) / (hi - lo) : 0.0;
    }
    return out;
}

}  // namespace

VarianceAnalysis variance_analysis(const std::vector<std::vector<ClientUpdate>>& updates_per_round,
                                   double eps) {
    if (updates_per_round.empty()) {
        throw std::invalid_argument("variance_analysis: need at least one round of updates");
    }

    VarianceAnalysis out;
    for (const auto& round : updates_per_round) {
        for (const auto& u : round) {
            if (std::find(out.client_ids.begin(), out.client_ids.end(), u.client_id) ==
                out.client_ids.end()) {
                out.client_ids.push_back(u.client_id);
            }
        }
    }
    std::sort(out.client_ids.begin(), out.client_ids.end());
    auto slot_of = [&](int id) {
        return static_cast<std::size_t>(
            std::find(out.client_ids.begin(), out.client_ids.end(), id) - out.client_ids.begin());
    };

    for (const auto& round : updates_per_round) {
        std::vector<double> row(out.client_ids.size(), kNaN);
        for (const auto& u : round) {
            row[slot_of(u.client_id)] = mean_inverse_variance(u.variance, eps);
        }
        out.mean_inv_variance.push_back(std::move(row));
    }

    // Normalize each client's series across the round axis.
    out.normalized.assign(out.mean_inv_variance.size(),
                          std::vector<double>(out.client_ids.size(), kNaN));
    for (std::size_t k = 0; k < out.client_ids.size(); ++k) {
        std::vector<double> series(out.mean_inv_variance.size());
        for (std::size_t r = 0; r < series.size(); ++r) series[r] = out.mean_inv_variance[r][k];
        const auto norm = minmax_normalize(series);
        for (std::size_t r = 0; r < series.size(); ++r) out.normalized[r][k] = norm[r];
    }

    // Round-1 per-layer view.
    const auto& first_round = updates_per_round.front();
    if (!first_round.empty()) {
        for (const auto& e : first_round.front().variance.values.entries) {
            out.layer_names.push_back(e.name);
        }
        out.round1_per_layer.assign(out.layer_names.size(),
                                    std::vector<double>(out.client_ids.size(), kNaN));
        for (const auto& u : first_round) {
            const std::size_t k = slot_of(u.client_id);
            for (std::size_t l = 0; l < out.layer_names.size(); ++l) {
                const auto& data = u.variance.values.entries[l].tensor.data;
                double acc = 0.0;
                for (double v : data) acc += 1.0 / (v + eps);
                out.round1_per_layer[l][k] = acc / static_cast<double>(data.size());
            }
        }
        // Fig-style global normalization: one min-max across the whole table.
        std::vector<double> flat;
        for (const auto& row : out.round1_per_layer) {
            flat.insert(flat.end(), row.begin(), row.end());
        }
        const auto norm = minmax_normalize(flat);
        out.round1_per_layer_normalized.assign(out.layer_names.size(),
                                               std::vector<double>(out.client_ids.size(), kNaN));
        std::size_t pos = 0;
        for (std::size_t l = 0; l < out.layer_names.size(); ++l) {
            for (std::size_t k = 0; k < out.client_ids.size(); ++k) {
                out.round1_per_layer_normalized[l][k] = norm[pos++];
            }
        }
    }
    return out;
}

}  // namespace fedsim
