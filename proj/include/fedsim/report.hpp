#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedsim/federation.hpp"
#include "fedsim/metrics.hpp"

namespace fedsim {

/// Doubles formatted with 17 significant digits so reruns diff cleanly.
std::string format_g17(double v);

/// rounds.csv. Header is
///   round,aggregator,batch_size,test_accuracy,test_loss,participants
/// plus one inv_var_<layer> column per layer when `layer_names` is non-empty.
/// Participants are ';'-joined client ids.
void write_rounds_csv(const std::string& path, const std::vector<RoundRecord>& records,
                      const std::vector<std::string>& layer_names);

/// summary.json: final/max accuracy, reliability index, rounds_to_target per
/// requested target (null when unreached), wall-clock seconds.
void write_summary_json(const std::string& path, const std::vector<RoundRecord>& records,
                        const std::vector<double>& targets, double wall_clock_seconds);

// One cell of the compare grid: an (aggregator, batch size) run summarized by
// the mean/stddev of its per-round accuracy and the reliability index.
struct CompareCell {
    Aggregator aggregator = Aggregator::FedAvg;
    int batch_size = 0;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double reliability = 0.0;
};

/// accuracy_matrix.csv (rows = batch sizes, mean/std per aggregator) and
/// reliability_matrix.csv (same rows plus an `overall` footer per column).
void write_compare_matrices(const std::string& dir, const std::vector<CompareCell>& cells);

/// Variance-analysis tables: mean inverse variance per round and client (raw
/// + normalized) and the round-1 per-layer view (raw + normalized).
void write_variance_tables(const std::string& dir, const VarianceAnalysis& analysis);

/// Loaded rounds.csv, as needed by the plot subcommand.
struct RoundsTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // numeric cells; NaN where not numeric
};
RoundsTable read_rounds_csv(const std::string& path);

}  // namespace fedsim
