#pragma once

#include <cstdint>

#include "fedsim/dataset.hpp"

namespace fedsim {

/// Uniform split: each client receives floor(n_c/K) samples of every class c,
/// per-class remainders going to the lowest-id clients. Sample placement is
/// shuffled deterministically by seed.
DatasetPartition partition_iid(const Dataset& dataset, int num_clients, std::uint64_t seed);

/// Label-skewed split: indices sorted by label, each class cut into shards
/// (K * classes_per_client shards in total) and dealt so every client holds
/// at most classes_per_client distinct labels while per-client sample counts
/// stay balanced within +-1. Throws std::invalid_argument with a diagnostic
/// when no such assignment exists.
DatasetPartition partition_noniid(const Dataset& dataset, int num_clients,
                                  int classes_per_client, std::uint64_t seed);

/// One starved client receives starved_fraction of the data restricted to
/// classes_for_starved randomly chosen labels; the rest is split IID over the
/// remaining K-1 clients.
DatasetPartition partition_unbalanced(const Dataset& dataset, int num_clients,
                                      int starved_client, double starved_fraction,
                                      int classes_for_starved, std::uint64_t seed);

}  // namespace fedsim
