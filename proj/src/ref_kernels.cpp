#include "fedsim/ref_kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsim::ref {

Tensor forward(const ModelParams& params, const MlpArchitecture& arch, const Tensor& inputs) {
    const auto dims = arch.layer_dims();
    Tensor acts = inputs;
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const Tensor& weight = params.entries[2 * l].tensor;
        const Tensor& bias = params.entries[2 * l + 1].tensor;
        const std::size_t batch = acts.dim(0);
        const std::size_t n_in = dims[l].first;
        const std::size_t n_out = dims[l].second;
        Tensor next({batch, n_out});
        for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t o = 0; o < n_out; ++o) {
                double z = bias[o];
                for (std::size_t i = 0; i < n_in; ++i) {
                    z += acts.at(r, i) * weight.at(i, o);
                }
                next.at(r, o) = z;
            }
        }
        if (l + 1 < dims.size()) {
            for (double& v : next.data) v = std::max(0.0, v);
        } else {
            for (std::size_t r = 0; r < batch; ++r) {
                double mx = next.at(r, 0);
                for (std::size_t o = 1; o < n_out; ++o) mx = std::max(mx, next.at(r, o));
                double sum = 0.0;
                for (std::size_t o = 0; o < n_out; ++o) {
                    next.at(r, o) = std::exp(next.at(r, o) - mx);
                    sum += next.at(r, o);
                }
                for (std::size_t o = 0; o < n_out; ++o) next.at(r, o) /= sum;
            }
        }
        acts = std::move(next);
    }
    return acts;
}

double mean_cross_entropy(const Tensor& probabilities, const std::vector<int>& labels) {
    if (labels.empty()) throw std::invalid_argument("mean_cross_entropy: empty batch");
    double loss = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        loss -= std::log(std::max(probabilities.at(r, static_cast<std::size_t>(labels[r])), 1e-300));
    }
    return loss / static_cast<double>(labels.size());
}

ModelParams aggregate_fedavg(const std::vector<ClientUpdate>& updates) {
    if (updates.empty()) throw std::invalid_argument("ref::aggregate_fedavg: no updates");
    double total = 0.0;
    for (const auto& u : updates) total += static_cast<double>(u.sample_count);

    ModelParams out = zeros_like(updates[0].params);
    for (const auto& u : updates) {
        const double w = static_cast<double>(u.sample_count) / total;
        for (std::size_t e = 0; e < out.entries.size(); ++e) {
            for (std::size_t i = 0; i < out.entries[e].tensor.size(); ++i) {
                out.entries[e].tensor[i] += w * u.params.entries[e].tensor[i];
            }
        }
    }
    return out;
}

ModelParams aggregate_precision_weighted(const std::vector<ClientUpdate>& updates, double eps) {
    if (updates.empty()) throw std::invalid_argument("ref::aggregate_precision_weighted: no updates");
    ModelParams numer = zeros_like(updates[0].params);
    ModelParams denom = zeros_like(updates[0].params);
    for (const auto& u : updates) {
        for (std::size_t e = 0; e < numer.entries.size(); ++e) {
            for (std::size_t i = 0; i < numer.entries[e].tensor.size(); ++i) {
                const double inv = 1.0 / (u.variance.values.entries[e].tensor[i] + eps);
                numer.entries[e].tensor[i] += inv * u.params.entries[e].tensor[i];
                denom.entries[e].tensor[i] += inv;
            }
        }
    }
    for (std::size_t e = 0; e < numer.entries.size(); ++e) {
        for (std::size_t i = 0; i < numer.entries[e].tensor.size(); ++i) {
            numer.entries[e].tensor[i] /= denom.entries[e].tensor[i];
        }
    }
    return numer;
}

}  // namespace fedsim::ref
