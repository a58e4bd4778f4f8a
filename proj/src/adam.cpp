#include "fedsim/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

void AdamConfig::validate() const {
    if (learning_rate < 0.0) throw std::invalid_argument("learning_rate must be >= 0");
    if (beta1 <= 0.0 || beta1 >= 1.0) throw std::invalid_argument("beta1 must be in (0,1)");
    if (beta2 <= 0.0 || beta2 >= 1.0) throw std::invalid_argument("beta2 must be in (0,1)");
    if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
}

AdamState AdamState::fresh(const ModelParams& like) {
    AdamState s;
    s.step_count = 0;
    s.first_moment = zeros_like(like);
    s.second_moment = zeros_like(like);
    return s;
}

AdamStepResult adam_step(const ModelParams& params, const ModelParams& grads,
                         const AdamState& state, const AdamConfig& cfg) {
    cfg.validate();
    require_compatible(params, grads, "adam_step params/grads");
    require_compatible(params, state.first_moment, "adam_step params/state.m");
    require_compatible(params, state.second_moment, "adam_step params/state.v");
    for (const auto& e : grads.entries) {
        require_finite(e.tensor, "adam_step gradient " + e.name);
    }

    AdamStepResult out;
    out.params = params;
    out.state = state;
    out.state.step_count = state.step_count + 1;

    const double t = static_cast<double>(out.state.step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);

    for (std::size_t e = 0; e < params.entries.size(); ++e) {
        const auto& g = grads.entries[e].tensor.data;
        auto& p = out.params.entries[e].tensor.data;
        auto& m = out.state.first_moment.entries[e].tensor.data;
        auto& v = out.state.second_moment.entries[e].tensor.data;
        const std::int64_t n = static_cast<std::int64_t>(p.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t j = 0; j < n; ++j) {
            const std::size_t i = static_cast<std::size_t>(j);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
    return out;
}

namespace {

std::size_t window_start(std::size_t steps_in_last_epoch) {
    // Average the last ceil(S/2) steps of the final epoch.
    const std::size_t kept = (steps_in_last_epoch + 1) / 2;
    return steps_in_last_epoch - kept;
}

}  // namespace

VarianceEstimate capture_variance(const std::vector<ModelParams>& second_moment_history,
                                  std::size_t steps_in_last_epoch) {
    if (second_moment_history.empty()) {
        throw std::invalid_argument("capture_variance: empty history");
    }
    if (steps_in_last_epoch < 1 || steps_in_last_epoch > second_moment_history.size()) {
        throw std::invalid_argument("capture_variance: steps_in_last_epoch out of range");
    }
    // The final epoch occupies the history's tail.
    const std::size_t epoch_begin = second_moment_history.size() - steps_in_last_epoch;
    const std::size_t from = epoch_begin + window_start(steps_in_last_epoch);
    const std::size_t count = second_moment_history.size() - from;

    VarianceEstimate est;
    est.values = zeros_like(second_moment_history.front());
    for (std::size_t s = from; s < second_moment_history.size(); ++s) {
        const auto& snap = second_moment_history[s];
        require_compatible(est.values, snap, "capture_variance history");
        for (std::size_t e = 0; e < snap.entries.size(); ++e) {
            const auto& src = snap.entries[e].tensor.data;
            auto& dst = est.values.entries[e].tensor.data;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (auto& e : est.values.entries) {
        for (double& x : e.tensor.data) x *= inv;
    }
    return est;
}

VarianceAccumulator::VarianceAccumulator(std::size_t steps_in_last_epoch, const ModelParams& like)
    : total_steps_(steps_in_last_epoch),
      first_kept_(window_start(steps_in_last_epoch)),
      sum_(zeros_like(like)) {
    if (steps_in_last_epoch < 1) {
        throw std::invalid_argument("VarianceAccumulator: need at least one step");
    }
}

void VarianceAccumulator::add(const ModelParams& second_moment) {
    if (seen_ >= total_steps_) {
        throw std::invalid_argument("VarianceAccumulator: more snapshots than declared steps");
    }
    if (seen_ >= first_kept_) {
        for (std::size_t e = 0; e < sum_.entries.size(); ++e) {
            const auto& src = second_moment.entries[e].tensor.data;
            auto& dst = sum_.entries[e].tensor.data;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
        ++kept_;
    }
    ++seen_;
}

VarianceEstimate VarianceAccumulator::finish() const {
    if (seen_ != total_steps_ || kept_ == 0) {
        throw std::invalid_argument("VarianceAccumulator: snapshot count mismatch");
    }
    VarianceEstimate est;
    est.values = sum_;
    const double inv = 1.0 / static_cast<double>(kept_);
    for (auto& e : est.values.entries) {
        for (double& x : e.tensor.data) x *= inv;
    }
    return est;
}

}  // namespace fedsim
