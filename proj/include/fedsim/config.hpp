#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/adam.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/mlp.hpp"

namespace fedsim {

enum class DatasetKind { Synthetic, IdxFiles };
enum class PartitionKind { Iid, NonIid, Unbalanced };

// Everything one experiment needs, loadable from a flat key=value config
// file with dotted section keys (see load_experiment_spec).
struct ExperimentSpec {
    DatasetKind dataset_kind = DatasetKind::Synthetic;

    // dataset.kind = idx
    std::string images_path, labels_path, test_images_path, test_labels_path;

    // dataset.kind = synthetic
    std::size_t n_train = 5000;
    std::size_t n_test = 1000;
    int num_classes = 10;
    std::size_t input_dim = 64;
    double cluster_spread = 0.25;
    std::uint64_t data_seed = 7;

    std::vector<std::size_t> hidden_dims = {32};

    PartitionKind partition = PartitionKind::Iid;
    int classes_per_client = 2;  // noniid
    int starved_client = 0;      // unbalanced
    double starved_fraction = 0.02;
    int classes_for_starved = 2;
    std::uint64_t partition_seed = 11;

    FederationConfig federation;
    AdamConfig adam;

    std::string output_dir = "out";
    bool record_variance_analysis = false;
    std::vector<double> accuracy_targets = {0.75, 0.80, 0.85};
    std::vector<int> compare_batch_sizes = {10, 50};

    void validate() const;  // throws std::invalid_argument
};

/// Parses the key=value config file; '#' starts a comment. Unknown keys and
/// malformed values raise FormatError; missing referenced paths raise
/// std::invalid_argument at load time.
ExperimentSpec load_experiment_spec(const std::string& path);

/// Builds the train/test pair named by the spec (generating or loading).
struct DataBundle {
    Dataset train;
    Dataset test;
};
DataBundle load_data(const ExperimentSpec& spec);

/// Builds the partition named by the spec over `train`.
DatasetPartition build_partition(const ExperimentSpec& spec, const Dataset& train);

/// Derives the MlpArchitecture (input_dim/num_classes come from the data).
MlpArchitecture build_architecture(const ExperimentSpec& spec, const Dataset& train);

}  // namespace fedsim
