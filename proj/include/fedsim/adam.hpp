#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

// Optimizer state. second_moment is the raw (uncentered) exponential moving
// average of squared gradients; it is the per-parameter variance proxy the
// precision-weighted aggregator consumes.
struct AdamState {
    std::uint64_t step_count = 0;
    ModelParams first_moment;
    ModelParams second_moment;

    static AdamState fresh(const ModelParams& like);
};

struct AdamStepResult {
    ModelParams params;
    AdamState state;
};

/// One bias-corrected Adam update. Pure: inputs are untouched. Throws
/// NumericError on non-finite gradient entries (state left unused).
AdamStepResult adam_step(const ModelParams& params, const ModelParams& grads,
                         const AdamState& state, const AdamConfig& cfg);

/// Mean of the second-moment snapshots over the last ceil(S/2) steps of the
/// final local epoch, where S = steps_in_last_epoch and the history's tail
/// holds that epoch's snapshots in step order.
VarianceEstimate capture_variance(const std::vector<ModelParams>& second_moment_history,
                                  std::size_t steps_in_last_epoch);

// Streaming equivalent of capture_variance for long epochs: feed every
// second-moment snapshot of the final epoch in order; finish() averages the
// same tail window without retaining the full history.
class VarianceAccumulator {
public:
    VarianceAccumulator(std::size_t steps_in_last_epoch, const ModelParams& like);

    void add(const ModelParams& second_moment);
    VarianceEstimate finish() const;

private:
    std::size_t total_steps_;
    std::size_t first_kept_;  // 0-based step index where the averaged window starts
    std::size_t seen_ = 0;
    std::size_t kept_ = 0;
    ModelParams sum_;
};

}  // namespace fedsim
