#include "fedsim/federation.hpp"

#include <cmath>
#include <exception>
#include <stdexcept>

#include "fedsim/metrics.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

const char* aggregator_name(Aggregator a) {
    return a == Aggregator::FedAvg ? "fedavg" : "pw";
}

std::optional<Aggregator> aggregator_from_name(const std::string& name) {
    if (name == "fedavg") return Aggregator::FedAvg;
    if (name == "pw" || name == "precision-weighted") return Aggregator::PrecisionWeighted;
    return std::nullopt;
}

void FederationConfig::validate() const {
    if (num_clients < 1) throw std::invalid_argument("num_clients must be >= 1");
    if (!(client_fraction > 0.0) || client_fraction > 1.0) {
        throw std::invalid_argument("client_fraction must be in (0, 1]");
    }
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (local_epochs < 1) throw std::invalid_argument("local_epochs must be >= 1");
    if (rounds < 0) throw std::invalid_argument("rounds must be >= 0");
    if (!(aggregation_epsilon > 0.0)) throw std::invalid_argument("aggregation_epsilon must be > 0");
}

namespace {

// v / (1 - beta2^t), the bias-corrected view of a second-moment snapshot.
ModelParams bias_correct(const ModelParams& second_moment, std::uint64_t step_count, double beta2) {
    ModelParams out = second_moment;
    const double scale = 1.0 / (1.0 - std::pow(beta2, static_cast<double>(step_count)));
    for (auto& e : out.entries) {
        for (double& v : e.tensor.data) v *= scale;
    }
    return out;
}

}  // namespace

ClientUpdate client_train(const ModelParams& global_params, const Dataset& data,
                          const std::vector<int>& indices, int client_id,
                          const FederationConfig& cfg, const MlpArchitecture& arch,
                          const AdamConfig& adam_cfg, std::uint64_t client_seed,
                          const AdamState* resume, AdamState* state_out) {
    if (indices.empty()) throw std::invalid_argument("client_train: client has no data");
    cfg.validate();
    require_params_match(global_params, arch);

    const std::size_t n_k = indices.size();
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t steps_per_epoch = (n_k + batch - 1) / batch;

    ModelParams params = global_params;
    AdamState state = resume ? *resume : AdamState::fresh(params);
    Rng rng(client_seed);

    VarianceAccumulator variance(steps_per_epoch, params);
    std::vector<int> order = indices;

    for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        rng.shuffle(order);
        const bool last_epoch = epoch + 1 == cfg.local_epochs;
        for (std::size_t start = 0; start < n_k; start += batch) {
            const std::size_t stop = std::min(start + batch, n_k);
            const std::vector<int> batch_ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                                             order.begin() + static_cast<std::ptrdiff_t>(stop));
            Tensor bx = gather_inputs(data, batch_ids);
            Tensor by({batch_ids.size()});
            for (std::size_t r = 0; r < batch_ids.size(); ++r) {
                by[r] = static_cast<double>(data.labels[static_cast<std::size_t>(batch_ids[r])]);
            }
            auto lg = loss_and_grad(params, arch, bx, by);
            auto stepped = adam_step(params, lg.grads, state, adam_cfg);
            params = std::move(stepped.params);
            state = std::move(stepped.state);
            if (last_epoch) {
                if (cfg.bias_corrected_variance) {
                    variance.add(bias_correct(state.second_moment, state.step_count, adam_cfg.beta2));
                } else {
                    variance.add(state.second_moment);
                }
            }
        }
    }

    if (state_out) *state_out = state;

    ClientUpdate update;
    update.client_id = client_id;
    update.sample_count = n_k;
    update.params = std::move(params);
    update.variance = variance.finish();
    return update;
}

std::vector<int> sample_round_clients(int num_clients, double client_fraction,
                                      std::uint64_t master_seed, int round_idx) {
    // floor(C*K) with a nudge so exact products are not lost to fp rounding
    int m = static_cast<int>(std::floor(client_fraction * num_clients + 1e-9));
    m = std::max(m, 1);
    m = std::min(m, num_clients);
    Rng rng(master_seed ^ static_cast<std::uint64_t>(round_idx));
    return rng.sample_without_replacement(num_clients, m);
}

RoundResult run_round(int round_idx, const ModelParams& global_params, const Dataset& train,
                      const DatasetPartition& partition, const FederationConfig& cfg,
                      const MlpArchitecture& arch, const AdamConfig& adam_cfg,
                      std::vector<std::optional<AdamState>>* optimizer_states) {
    if (round_idx < 1) throw std::invalid_argument("run_round: round_idx must be >= 1");
    cfg.validate();
    if (partition.num_clients() != static_cast<std::size_t>(cfg.num_clients)) {
        throw std::invalid_argument("run_round: partition has " +
                                    std::to_string(partition.num_clients()) + " clients, config " +
                                    std::to_string(cfg.num_clients));
    }

    const std::vector<int> sampled =
        sample_round_clients(cfg.num_clients, cfg.client_fraction, cfg.master_seed, round_idx);

    RoundResult result;
    result.updates.resize(sampled.size());
    std::vector<std::exception_ptr> failures(sampled.size());

    // Clients are independent; train them in parallel. Results land in
    // client-id order, so the aggregation input is independent of scheduling.
    const std::int64_t count = static_cast<std::int64_t>(sampled.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t s = 0; s < count; ++s) {
        const std::size_t su = static_cast<std::size_t>(s);
        const int client_id = sampled[su];
        try {
            const std::uint64_t seed =
                derive_seed(cfg.master_seed, static_cast<std::uint64_t>(round_idx),
                            static_cast<std::uint64_t>(client_id));
            const AdamState* resume = nullptr;
            AdamState final_state;
            AdamState* state_sink = nullptr;
            if (!cfg.reset_optimizer_per_round && optimizer_states) {
                auto& slot = (*optimizer_states)[static_cast<std::size_t>(client_id)];
                if (slot.has_value()) resume = &slot.value();
                state_sink = &final_state;
            }
            result.updates[su] = client_train(
                global_params, train, partition.client_indices[static_cast<std::size_t>(client_id)],
                client_id, cfg, arch, adam_cfg, seed, resume, state_sink);
            if (state_sink) {
                (*optimizer_states)[static_cast<std::size_t>(client_id)] = std::move(final_state);
            }
        } catch (...) {
            failures[su] = std::current_exception();
        }
    }
    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }

    result.global = cfg.aggregator == Aggregator::FedAvg
                        ? aggregate_fedavg(result.updates)
                        : aggregate_precision_weighted(result.updates, cfg.aggregation_epsilon);
    return result;
}

ExperimentResult run_experiment(const FederationConfig& cfg, const MlpArchitecture& arch,
                                const AdamConfig& adam_cfg, const Dataset& train,
                                const DatasetPartition& partition, const Dataset& test_set,
                                bool keep_update_history) {
    cfg.validate();
    adam_cfg.validate();

    ExperimentResult result;
    result.final_params = init_params(arch, cfg.master_seed);

    std::vector<std::optional<AdamState>> optimizer_states;
    if (!cfg.reset_optimizer_per_round) {
        optimizer_states.resize(static_cast<std::size_t>(cfg.num_clients));
    }

    for (int round = 1; round <= cfg.rounds; ++round) {
        RoundResult rr = run_round(round, result.final_params, train, partition, cfg, arch,
                                   adam_cfg,
                                   cfg.reset_optimizer_per_round ? nullptr : &optimizer_states);
        result.final_params = std::move(rr.global);

        const Evaluation eval = evaluate(result.final_params, arch, test_set);

        RoundRecord rec;
        rec.round = round;
        rec.aggregator = cfg.aggregator;
        rec.batch_size = cfg.batch_size;
        rec.test_accuracy = eval.accuracy;
        rec.test_loss = eval.loss;
        rec.participants.reserve(rr.updates.size());
        for (const auto& u : rr.updates) rec.participants.push_back(u.client_id);

        // Mean of (v+eps)^-1 per layer across the round's participants.
        for (std::size_t e = 0; e < result.final_params.entries.size(); ++e) {
            double acc = 0.0;
            std::size_t count = 0;
            for (const auto& u : rr.updates) {
                const auto& v = u.variance.values.entries[e].tensor.data;
                for (double x : v) acc += 1.0 / (x + cfg.aggregation_epsilon);
                count += v.size();
            }
            rec.per_layer_mean_inv_variance.emplace_back(result.final_params.entries[e].name,
                                                         acc / static_cast<double>(count));
        }

        result.rounds.push_back(std::move(rec));
        if (keep_update_history) result.update_history.push_back(std::move(rr.updates));
    }
    return result;
}

}  // namespace fedsim
