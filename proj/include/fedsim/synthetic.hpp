#pragma once

#include <cstdint>

#include "fedsim/dataset.hpp"

namespace fedsim {

/// Class-conditional Gaussian clusters: class c is centered on a seeded
/// unit-norm direction mu_c and samples are mu_c + cluster_spread * N(0, I).
/// Labels are balanced within +-1 and interleaved. Deterministic per seed.
Dataset generate_synthetic(std::size_t n, int num_classes, std::size_t input_dim,
                           double cluster_spread, std::uint64_t seed);

}  // namespace fedsim
