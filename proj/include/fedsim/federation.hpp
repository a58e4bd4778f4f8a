#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/adam.hpp"
#include "fedsim/aggregate.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/mlp.hpp"
#include "fedsim/partition.hpp"

namespace fedsim {

enum class Aggregator { FedAvg, PrecisionWeighted };

const char* aggregator_name(Aggregator a);
std::optional<Aggregator> aggregator_from_name(const std::string& name);

struct FederationConfig {
    int num_clients = 10;          // K
    double client_fraction = 1.0;  // C in (0, 1]
    int batch_size = 50;           // B
    int local_epochs = 1;          // E
    int rounds = 30;               // R
    Aggregator aggregator = Aggregator::FedAvg;
    double aggregation_epsilon = 1e-9;
    std::uint64_t master_seed = 1;
    // The broadcast model invalidates stale moments, so optimizer state is
    // rebuilt every round by default; set false to carry it across rounds.
    bool reset_optimizer_per_round = true;
    // Variance snapshots use the raw second moment by default; set true to
    // apply the 1/(1-beta2^t) correction instead.
    bool bias_corrected_variance = false;

    void validate() const;
};

// Per-round metrics row.
struct RoundRecord {
    int round = 0;
    Aggregator aggregator = Aggregator::FedAvg;
    int batch_size = 0;
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    std::vector<int> participants;
    std::vector<std::pair<std::string, double>> per_layer_mean_inv_variance;
};

/// Local training: E epochs of mini-batch Adam (last partial batch kept)
/// starting from global_params, observation order reshuffled per epoch from
/// client_seed. Returns updated params, n_k, and the variance captured over
/// the second half of the last epoch. `resume` continues from a previous
/// round's optimizer state; `state_out` receives the final state.
ClientUpdate client_train(const ModelParams& global_params, const Dataset& data,
                          const std::vector<int>& indices, int client_id,
                          const FederationConfig& cfg, const MlpArchitecture& arch,
                          const AdamConfig& adam_cfg, std::uint64_t client_seed,
                          const AdamState* resume = nullptr, AdamState* state_out = nullptr);

/// The max(floor(C*K), 1) participants of a round, ascending, sampled
/// uniformly without replacement from a generator seeded with
/// master_seed ^ round_idx.
std::vector<int> sample_round_clients(int num_clients, double client_fraction,
                                      std::uint64_t master_seed, int round_idx);

struct RoundResult {
    ModelParams global;
    std::vector<ClientUpdate> updates;  // ordered by client_id
};

/// One communication round: sample clients, train each from the same incoming
/// global params (in parallel), aggregate with the configured scheme.
/// `optimizer_states`, when non-null, holds one slot per client and is
/// consulted/updated when cfg.reset_optimizer_per_round is false.
RoundResult run_round(int round_idx, const ModelParams& global_params, const Dataset& train,
                      const DatasetPartition& partition, const FederationConfig& cfg,
                      const MlpArchitecture& arch, const AdamConfig& adam_cfg,
                      std::vector<std::optional<AdamState>>* optimizer_states = nullptr);

struct ExperimentResult {
    std::vector<RoundRecord> rounds;
    ModelParams final_params;
    // Per-round client updates, recorded only when requested.
    std::vector<std::vector<ClientUpdate>> update_history;
};

/// Full protocol: round 1 starts every client from init_params(arch,
/// master_seed); later rounds broadcast the aggregate. Test accuracy and loss
/// are evaluated after every round.
ExperimentResult run_experiment(const FederationConfig& cfg, const MlpArchitecture& arch,
                                const AdamConfig& adam_cfg, const Dataset& train,
                                const DatasetPartition& partition, const Dataset& test_set,
                                bool keep_update_history = false);

}  // namespace fedsim
