#include "fedsim/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

// All OpenMP loops below assign each output scalar to exactly one thread and
// keep the accumulation order inside a scalar fixed, so results are
// bit-identical for any thread count.

// out (batch, n_out) = acts (batch, n_in) * W (n_in, n_out) + b
void dense_forward(const Tensor& acts, const Tensor& weight, const Tensor& bias, Tensor& out) {
    const std::int64_t batch = static_cast<std::int64_t>(acts.dim(0));
    const std::size_t n_in = acts.dim(1);
    const std::size_t n_out = bias.dim(0);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < batch; ++r) {
        double* row = &out.data[static_cast<std::size_t>(r) * n_out];
        const double* in_row = &acts.data[static_cast<std::size_t>(r) * n_in];
        for (std::size_t o = 0; o < n_out; ++o) row[o] = bias.data[o];
        for (std::size_t i = 0; i < n_in; ++i) {
            const double xi = in_row[i];
            const double* w_row = &weight.data[i * n_out];
            for (std::size_t o = 0; o < n_out; ++o) row[o] += xi * w_row[o];
        }
    }
}

void relu_inplace(Tensor& t) {
    const std::int64_t n = static_cast<std::int64_t>(t.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        if (t.data[static_cast<std::size_t>(i)] < 0.0) t.data[static_cast<std::size_t>(i)] = 0.0;
    }
}

void softmax_rows_inplace(Tensor& t) {
    const std::int64_t batch = static_cast<std::int64_t>(t.dim(0));
    const std::size_t cols = t.dim(1);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < batch; ++r) {
        double* row = &t.data[static_cast<std::size_t>(r) * cols];
        double mx = row[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        for (std::size_t c = 0; c < cols; ++c) row[c] /= sum;
    }
}

// Activations of every layer; [0] is the input batch, back() the
// probabilities. Preactivations are kept only as the post-ReLU values, which
// is all the backward pass needs (relu'(z) = 1 iff relu(z) > 0).
std::vector<Tensor> forward_pass(const ModelParams& params, const MlpArchitecture& arch,
                                 const Tensor& inputs) {
    const auto dims = arch.layer_dims();
    std::vector<Tensor> acts;
    acts.reserve(dims.size() + 1);
    acts.push_back(inputs);
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const Tensor& weight = params.entries[2 * l].tensor;
        const Tensor& bias = params.entries[2 * l + 1].tensor;
        Tensor next({inputs.dim(0), dims[l].second});
        dense_forward(acts.back(), weight, bias, next);
        if (l + 1 < dims.size()) {
            relu_inplace(next);
        } else {
            softmax_rows_inplace(next);
        }
        acts.push_back(std::move(next));
    }
    return acts;
}

void check_inputs(const MlpArchitecture& arch, const Tensor& inputs) {
    if (inputs.rank() != 2 || inputs.dim(1) != arch.input_dim) {
        throw ShapeError("batch inputs must be (batch, " + std::to_string(arch.input_dim) +
                         "), got " + shape_to_string(inputs.shape));
    }
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> MlpArchitecture::layer_dims() const {
    std::vector<std::pair<std::size_t, std::size_t>> dims;
    std::size_t prev = input_dim;
    for (std::size_t h : hidden_dims) {
        dims.emplace_back(prev, h);
        prev = h;
    }
    dims.emplace_back(prev, num_classes);
    return dims;
}

std::size_t MlpArchitecture::parameter_count() const {
    std::size_t n = 0;
    for (auto [in, out] : layer_dims()) n += in * out + out;
    return n;
}

void MlpArchitecture::validate() const {
    if (input_dim == 0) throw std::invalid_argument("input_dim must be positive");
    if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
    for (std::size_t h : hidden_dims) {
        if (h == 0) throw std::invalid_argument("hidden dimensions must be positive");
    }
}

void require_params_match(const ModelParams& params, const MlpArchitecture& arch) {
    const auto dims = arch.layer_dims();
    if (params.entries.size() != 2 * dims.size()) {
        throw ShapeError("params have " + std::to_string(params.entries.size()) +
                         " entries, architecture needs " + std::to_string(2 * dims.size()));
    }
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const std::string stem = "fc" + std::to_string(l + 1);
        const auto& w = params.entries[2 * l];
        const auto& b = params.entries[2 * l + 1];
        if (w.name != stem + ".weight" ||
            w.tensor.shape != std::vector<std::size_t>{dims[l].first, dims[l].second}) {
            throw ShapeError("layer " + std::to_string(l + 1) + " weight mismatch: " + w.name +
                             " " + shape_to_string(w.tensor.shape));
        }
        if (b.name != stem + ".bias" || b.tensor.shape != std::vector<std::size_t>{dims[l].second}) {
            throw ShapeError("layer " + std::to_string(l + 1) + " bias mismatch: " + b.name + " " +
                             shape_to_string(b.tensor.shape));
        }
    }
}

ModelParams init_params(const MlpArchitecture& arch, std::uint64_t seed) {
    arch.validate();
    Rng rng(splitmix64(seed));
    ModelParams params;
    const auto dims = arch.layer_dims();
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const auto [fan_in, fan_out] = dims[l];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Tensor weight({fan_in, fan_out});
        for (double& w : weight.data) w = rng.uniform(-bound, bound);
        const std::string stem = "fc" + std::to_string(l + 1);
        params.entries.push_back({stem + ".weight", std::move(weight)});
        params.entries.push_back({stem + ".bias", Tensor({fan_out})});
    }
    return params;
}

Tensor forward(const ModelParams& params, const MlpArchitecture& arch, const Tensor& inputs) {
    require_params_match(params, arch);
    check_inputs(arch, inputs);
    if (inputs.dim(0) == 0) throw std::invalid_argument("forward: empty batch");
    auto acts = forward_pass(params, arch, inputs);
    return std::move(acts.back());
}

LossGrad loss_and_grad(const ModelParams& params, const MlpArchitecture& arch,
                       const Tensor& inputs, const Tensor& labels) {
    require_params_match(params, arch);
    check_inputs(arch, inputs);
    const std::size_t batch = inputs.dim(0);
    if (batch == 0) throw std::invalid_argument("loss_and_grad: empty batch");

    const std::size_t classes = arch.num_classes;
    const bool one_hot = labels.rank() == 2;
    if (one_hot) {
        if (labels.dim(0) != batch || labels.dim(1) != classes) {
            throw ShapeError("one-hot labels must be (batch, num_classes), got " +
                             shape_to_string(labels.shape));
        }
    } else {
        if (labels.rank() != 1 || labels.dim(0) != batch) {
            throw ShapeError("labels must be (batch) class indices, got " +
                             shape_to_string(labels.shape));
        }
        for (double v : labels.data) {
            if (v < 0.0 || v >= static_cast<double>(classes) || v != std::floor(v)) {
                throw std::invalid_argument("label out of range [0, num_classes)");
            }
        }
    }

    auto acts = forward_pass(params, arch, inputs);
    const Tensor& probs = acts.back();

    // delta = (p - y) / batch, the softmax + cross-entropy output gradient.
    Tensor delta({batch, classes});
    std::vector<double> row_losses(batch, 0.0);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    {
        const std::int64_t b64 = static_cast<std::int64_t>(batch);
#pragma omp parallel for schedule(static)
        for (std::int64_t r = 0; r < b64; ++r) {
            const std::size_t ru = static_cast<std::size_t>(r);
            double loss_r = 0.0;
            for (std::size_t c = 0; c < classes; ++c) {
                const double y = one_hot ? labels.at(ru, c)
                                         : (static_cast<std::size_t>(labels[ru]) == c ? 1.0 : 0.0);
                const double p = probs.at(ru, c);
                if (y != 0.0) loss_r -= y * std::log(std::max(p, 1e-300));
                delta.at(ru, c) = (p - y) * inv_batch;
            }
            row_losses[ru] = loss_r;
        }
    }
    double loss = 0.0;
    for (double l : row_losses) loss += l;  // fixed order, independent of threads
    loss *= inv_batch;

    const auto dims = arch.layer_dims();
    LossGrad result;
    result.loss = loss;
    result.grads = zeros_like(params);

    // Backward pass, output layer first.
    Tensor cur_delta = std::move(delta);
    for (std::size_t l = dims.size(); l-- > 0;) {
        const Tensor& layer_in = acts[l];  // (batch, n_in)
        const std::size_t n_in = dims[l].first;
        const std::size_t n_out = dims[l].second;
        Tensor& grad_w = result.grads.entries[2 * l].tensor;
        Tensor& grad_b = result.grads.entries[2 * l + 1].tensor;

        {
            const std::int64_t n_in64 = static_cast<std::int64_t>(n_in);
#pragma omp parallel for schedule(static)
            for (std::int64_t i = 0; i < n_in64; ++i) {
                double* gw_row = &grad_w.data[static_cast<std::size_t>(i) * n_out];
                for (std::size_t r = 0; r < batch; ++r) {
                    const double a = layer_in.data[r * n_in + static_cast<std::size_t>(i)];
                    if (a == 0.0) continue;
                    const double* d_row = &cur_delta.data[r * n_out];
                    for (std::size_t o = 0; o < n_out; ++o) gw_row[o] += a * d_row[o];
                }
            }
        }
        {
            const std::int64_t n_out64 = static_cast<std::int64_t>(n_out);
#pragma omp parallel for schedule(static)
            for (std::int64_t o = 0; o < n_out64; ++o) {
                double acc = 0.0;
                for (std::size_t r = 0; r < batch; ++r) {
                    acc += cur_delta.data[r * n_out + static_cast<std::size_t>(o)];
                }
                grad_b.data[static_cast<std::size_t>(o)] = acc;
            }
        }

        if (l > 0) {
            // Propagate through the weights and the previous ReLU.
            const Tensor& weight = params.entries[2 * l].tensor;  // (n_in, n_out)
            Tensor prev_delta({batch, n_in});
            const std::int64_t b64 = static_cast<std::int64_t>(batch);
#pragma omp parallel for schedule(static)
            for (std::int64_t r = 0; r < b64; ++r) {
                const std::size_t ru = static_cast<std::size_t>(r);
                const double* d_row = &cur_delta.data[ru * n_out];
                double* p_row = &prev_delta.data[ru * n_in];
                for (std::size_t i = 0; i < n_in; ++i) {
                    // layer_in is post-ReLU: derivative is 1 iff the unit fired
                    if (layer_in.data[ru * n_in + i] <= 0.0) {
                        p_row[i] = 0.0;
                        continue;
                    }
                    const double* w_row = &weight.data[i * n_out];
                    double acc = 0.0;
                    for (std::size_t o = 0; o < n_out; ++o) acc += d_row[o] * w_row[o];
                    p_row[i] = acc;
                }
            }
            cur_delta = std::move(prev_delta);
        }
    }
    return result;
}

}  // namespace fedsim
