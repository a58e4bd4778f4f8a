#include "fedsim/aggregate.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

void check_updates(const std::vector<ClientUpdate>& updates, bool need_variance) {
    if (updates.empty()) throw std::invalid_argument("aggregate: no client updates");
    for (std::size_t k = 1; k < updates.size(); ++k) {
        require_compatible(updates[0].params, updates[k].params, "aggregate params");
    }
    if (!need_variance) return;
    for (const auto& u : updates) {
        require_compatible(u.params, u.variance.values, "aggregate params/variance");
        for (const auto& e : u.variance.values.entries) {
            for (double v : e.tensor.data) {
                if (v < 0.0) {
                    throw std::invalid_argument("aggregate: negative variance entry in " + e.name +
                                                " from client " + std::to_string(u.client_id));
                }
            }
        }
    }
}

}  // namespace

ModelParams aggregate_fedavg(const std::vector<ClientUpdate>& updates) {
    check_updates(updates, false);
    std::size_t total = 0;
    for (const auto& u : updates) {
        if (u.sample_count == 0) throw std::invalid_argument("aggregate_fedavg: n_k must be positive");
        total += u.sample_count;
    }
    // Normalized weights so the K=1 case reduces to w * 1.0 exactly.
    std::vector<double> weight(updates.size());
    for (std::size_t k = 0; k < updates.size(); ++k) {
        weight[k] = static_cast<double>(updates[k].sample_count) / static_cast<double>(total);
    }

    ModelParams out = zeros_like(updates[0].params);
    for (std::size_t e = 0; e < out.entries.size(); ++e) {
        auto& dst = out.entries[e].tensor.data;
        const std::int64_t n = static_cast<std::int64_t>(dst.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t j = 0; j < n; ++j) {
            const std::size_t i = static_cast<std::size_t>(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < updates.size(); ++k) {
                acc += weight[k] * updates[k].params.entries[e].tensor.data[i];
            }
            dst[i] = acc;
        }
    }
    return out;
}

ModelParams aggregate_precision_weighted(const std::vector<ClientUpdate>& updates, double eps) {
    check_updates(updates, true);
    if (!(eps >= 0.0)) throw std::invalid_argument("aggregate_precision_weighted: eps must be >= 0");

    ModelParams out = zeros_like(updates[0].params);
    for (std::size_t e = 0; e < out.entries.size(); ++e) {
        auto& dst = out.entries[e].tensor.data;
        const std::int64_t n = static_cast<std::int64_t>(dst.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t j = 0; j < n; ++j) {
            const std::size_t i = static_cast<std::size_t>(j);
            double denom = 0.0;
            for (std::size_t k = 0; k < updates.size(); ++k) {
                denom += 1.0 / (updates[k].variance.values.entries[e].tensor.data[i] + eps);
            }
            // Per-client weights normalized first: one client yields w * 1.0.
            double acc = 0.0;
            for (std::size_t k = 0; k < updates.size(); ++k) {
                const double w =
                    (1.0 / (updates[k].variance.values.entries[e].tensor.data[i] + eps)) / denom;
                acc += w * updates[k].params.entries[e].tensor.data[i];
            }
            dst[i] = acc;
        }
    }
    return out;
}

}  // namespace fedsim
