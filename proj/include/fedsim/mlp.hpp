#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/tensor.hpp"

namespace fedsim {

// Feed-forward classifier: dense layers with ReLU hidden activations and a
// softmax output. hidden_dims may be empty (multinomial logistic regression).
struct MlpArchitecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims;
    std::size_t num_classes = 0;

    /// (fan_in, fan_out) of each dense layer, input to output.
    std::vector<std::pair<std::size_t, std::size_t>> layer_dims() const;

    std::size_t num_layers() const { return hidden_dims.size() + 1; }
    std::size_t parameter_count() const;

    /// Throws std::invalid_argument if any dimension is invalid.
    void validate() const;
};

/// Glorot-uniform weights ([-sqrt(6/(fan_in+fan_out)), +sqrt(...)]), zero
/// biases. Deterministic for a given (arch, seed). Entries are named
/// "fc<i>.weight" / "fc<i>.bias", i starting at 1.
ModelParams init_params(const MlpArchitecture& arch, std::uint64_t seed);

/// Batch forward pass. inputs is (batch, input_dim); returns class
/// probabilities (batch, num_classes), each row summing to 1.
Tensor forward(const ModelParams& params, const MlpArchitecture& arch, const Tensor& inputs);

struct LossGrad {
    double loss = 0.0;
    ModelParams grads;
};

/// Mean categorical cross-entropy over the batch plus analytic gradients.
/// labels is either (batch) class indices or (batch, num_classes) one-hot.
LossGrad loss_and_grad(const ModelParams& params, const MlpArchitecture& arch,
                       const Tensor& inputs, const Tensor& labels);

/// Throws ShapeError unless params matches the layer layout of arch.
void require_params_match(const ModelParams& params, const MlpArchitecture& arch);

}  // namespace fedsim
