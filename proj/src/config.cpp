#include "fedsim/config.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fedsim/errors.hpp"
#include "fedsim/idx_io.hpp"
#include "fedsim/synthetic.hpp"

namespace fedsim {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw FormatError("config key " + key + ": expected integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw FormatError("config key " + key + ": expected number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw FormatError("config key " + key + ": expected boolean, got '" + value + "'");
}

// Flat key=value file with dotted section keys; '#' starts a comment.
std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config file not found: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": empty key");
        }
        kv[key] = value;
    }
    return kv;
}

}  // namespace

void ExperimentSpec::validate() const {
    if (dataset_kind == DatasetKind::IdxFiles) {
        for (const auto& p : {images_path, labels_path, test_images_path, test_labels_path}) {
            if (p.empty()) {
                throw std::invalid_argument("idx dataset requires all four file paths");
            }
            if (!std::filesystem::exists(p)) {
                throw std::invalid_argument("referenced path does not exist: " + p);
            }
        }
    } else {
        if (n_train < static_cast<std::size_t>(num_classes) || n_test == 0) {
            throw std::invalid_argument("synthetic dataset sizes too small");
        }
    }
    federation.validate();
    adam.validate();
    for (double t : accuracy_targets) {
        if (t < 0.0 || t > 1.0) throw std::invalid_argument("accuracy target outside [0,1]");
    }
    if (output_dir.empty()) throw std::invalid_argument("output.dir must not be empty");
}

ExperimentSpec load_experiment_spec(const std::string& path) {
    auto kv = parse_kv_file(path);
    ExperimentSpec spec;

    auto take = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };

    if (auto v = take("dataset.kind")) {
        if (*v == "synthetic") {
            spec.dataset_kind = DatasetKind::Synthetic;
        } else if (*v == "idx") {
            spec.dataset_kind = DatasetKind::IdxFiles;
        } else {
            throw FormatError("dataset.kind must be 'synthetic' or 'idx', got '" + *v + "'");
        }
    }
    if (auto v = take("dataset.images")) spec.images_path = *v;
    if (auto v = take("dataset.labels")) spec.labels_path = *v;
    if (auto v = take("dataset.test_images")) spec.test_images_path = *v;
    if (auto v = take("dataset.test_labels")) spec.test_labels_path = *v;
    if (auto v = take("dataset.n_train")) spec.n_train = static_cast<std::size_t>(parse_int("dataset.n_train", *v));
    if (auto v = take("dataset.n_test")) spec.n_test = static_cast<std::size_t>(parse_int("dataset.n_test", *v));
    if (auto v = take("dataset.num_classes")) spec.num_classes = static_cast<int>(parse_int("dataset.num_classes", *v));
    if (auto v = take("dataset.input_dim")) spec.input_dim = static_cast<std::size_t>(parse_int("dataset.input_dim", *v));
    if (auto v = take("dataset.cluster_spread")) spec.cluster_spread = parse_double("dataset.cluster_spread", *v);
    if (auto v = take("dataset.seed")) spec.data_seed = static_cast<std::uint64_t>(parse_int("dataset.seed", *v));

    if (auto v = take("arch.hidden_dims")) {
        spec.hidden_dims.clear();
        for (const auto& item : split_list(*v)) {
            spec.hidden_dims.push_back(static_cast<std::size_t>(parse_int("arch.hidden_dims", item)));
        }
    }

    if (auto v = take("partition.kind")) {
        if (*v == "iid") {
            spec.partition = PartitionKind::Iid;
        } else if (*v == "noniid") {
            spec.partition = PartitionKind::NonIid;
        } else if (*v == "unbalanced") {
            spec.partition = PartitionKind::Unbalanced;
        } else {
            throw FormatError("partition.kind must be iid|noniid|unbalanced, got '" + *v + "'");
        }
    }
    if (auto v = take("partition.classes_per_client")) spec.classes_per_client = static_cast<int>(parse_int("partition.classes_per_client", *v));
    if (auto v = take("partition.starved_client")) spec.starved_client = static_cast<int>(parse_int("partition.starved_client", *v));
    if (auto v = take("partition.starved_fraction")) spec.starved_fraction = parse_double("partition.starved_fraction", *v);
    if (auto v = take("partition.classes_for_starved")) spec.classes_for_starved = static_cast<int>(parse_int("partition.classes_for_starved", *v));
    if (auto v = take("partition.seed")) spec.partition_seed = static_cast<std::uint64_t>(parse_int("partition.seed", *v));

    if (auto v = take("federation.num_clients")) spec.federation.num_clients = static_cast<int>(parse_int("federation.num_clients", *v));
    if (auto v = take("federation.client_fraction")) spec.federation.client_fraction = parse_double("federation.client_fraction", *v);
    if (auto v = take("federation.batch_size")) spec.federation.batch_size = static_cast<int>(parse_int("federation.batch_size", *v));
    if (auto v = take("federation.local_epochs")) spec.federation.local_epochs = static_cast<int>(parse_int("federation.local_epochs", *v));
    if (auto v = take("federation.rounds")) spec.federation.rounds = static_cast<int>(parse_int("federation.rounds", *v));
    if (auto v = take("federation.aggregator")) {
        auto agg = aggregator_from_name(*v);
        if (!agg) throw FormatError("federation.aggregator must be fedavg|pw, got '" + *v + "'");
        spec.federation.aggregator = *agg;
    }
    if (auto v = take("federation.aggregation_epsilon")) spec.federation.aggregation_epsilon = parse_double("federation.aggregation_epsilon", *v);
    if (auto v = take("federation.master_seed")) spec.federation.master_seed = static_cast<std::uint64_t>(parse_int("federation.master_seed", *v));
    if (auto v = take("federation.reset_optimizer_per_round")) spec.federation.reset_optimizer_per_round = parse_bool("federation.reset_optimizer_per_round", *v);
    if (auto v = take("federation.bias_corrected_variance")) spec.federation.bias_corrected_variance = parse_bool("federation.bias_corrected_variance", *v);

    if (auto v = take("adam.learning_rate")) spec.adam.learning_rate = parse_double("adam.learning_rate", *v);
    if (auto v = take("adam.beta1")) spec.adam.beta1 = parse_double("adam.beta1", *v);
    if (auto v = take("adam.beta2")) spec.adam.beta2 = parse_double("adam.beta2", *v);
    if (auto v = take("adam.epsilon")) spec.adam.epsilon = parse_double("adam.epsilon", *v);

    if (auto v = take("output.dir")) spec.output_dir = *v;
    if (auto v = take("output.record_variance_analysis")) spec.record_variance_analysis = parse_bool("output.record_variance_analysis", *v);
    if (auto v = take("report.targets")) {
        spec.accuracy_targets.clear();
        for (const auto& item : split_list(*v)) {
            spec.accuracy_targets.push_back(parse_double("report.targets", item));
        }
    }
    if (auto v = take("compare.batch_sizes")) {
        spec.compare_batch_sizes.clear();
        for (const auto& item : split_list(*v)) {
            spec.compare_batch_sizes.push_back(static_cast<int>(parse_int("compare.batch_sizes", item)));
        }
    }

    if (!kv.empty()) {
        throw FormatError("unknown config key: " + kv.begin()->first);
    }
    spec.validate();
    return spec;
}

DataBundle load_data(const ExperimentSpec& spec) {
    DataBundle bundle;
    if (spec.dataset_kind == DatasetKind::Synthetic) {
        bundle.train = generate_synthetic(spec.n_train, spec.num_classes, spec.input_dim,
                                          spec.cluster_spread, spec.data_seed);
        bundle.test = generate_synthetic(spec.n_test, spec.num_classes, spec.input_dim,
                                         spec.cluster_spread, spec.data_seed + 1);
    } else {
        bundle.train = load_idx(spec.images_path, spec.labels_path);
        bundle.test = load_idx(spec.test_images_path, spec.test_labels_path);
        if (bundle.train.num_classes != bundle.test.num_classes) {
            const int classes = std::max(bundle.train.num_classes, bundle.test.num_classes);
            bundle.train.num_classes = classes;
            bundle.test.num_classes = classes;
        }
    }
    return bundle;
}

DatasetPartition build_partition(const ExperimentSpec& spec, const Dataset& train) {
    switch (spec.partition) {
        case PartitionKind::Iid:
            return partition_iid(train, spec.federation.num_clients, spec.partition_seed);
        case PartitionKind::NonIid:
            return partition_noniid(train, spec.federation.num_clients, spec.classes_per_client,
                                    spec.partition_seed);
        case PartitionKind::Unbalanced:
            return partition_unbalanced(train, spec.federation.num_clients, spec.starved_client,
                                        spec.starved_fraction, spec.classes_for_starved,
                                        spec.partition_seed);
    }
    throw std::invalid_argument("unreachable partition kind");
}

MlpArchitecture build_architecture(const ExperimentSpec& spec, const Dataset& train) {
    MlpArchitecture arch;
    arch.input_dim = train.input_dim();
    arch.hidden_dims = spec.hidden_dims;
    arch.num_classes = static_cast<std::size_t>(train.num_classes);
    arch.validate();
    return arch;
}

}  // namespace fedsim
