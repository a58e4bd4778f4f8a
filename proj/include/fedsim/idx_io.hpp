#pragma once

#include <string>

#include "fedsim/dataset.hpp"

namespace fedsim {

// IDX binary container (the format MNIST-family datasets ship in). All
// integers are big-endian. Images: magic 0x00000803, dims (count, rows,
// cols), unsigned-byte pixels. Labels: magic 0x00000801, dims (count).

/// Loads an image/label file pair; pixels are scaled to [0,1] by /255.
/// Throws FormatError (wrong magic, naming the found value), ConsistencyError
/// (count mismatch between the files) or IoError (unreadable/truncated).
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes a dataset back to the IDX pair, quantizing pixels by round(p*255).
/// Data that came out of load_idx round-trips bit-identically.
void write_idx(const Dataset& dataset, std::size_t rows, std::size_t cols,
               const std::string& images_path, const std::string& labels_path);

}  // namespace fedsim
