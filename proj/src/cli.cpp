#include "fedsim/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsim/config.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/report.hpp"
#include "fedsim/svg_plot.hpp"

namespace fedsim {

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> aggregator;
    std::optional<int> rounds;
    std::optional<std::string> out_dir;
};

void apply_overrides(ExperimentSpec& spec, const Overrides& ov) {
    if (ov.seed) spec.federation.master_seed = *ov.seed;
    if (ov.aggregator) {
        auto agg = aggregator_from_name(*ov.aggregator);
        if (!agg) throw std::invalid_argument("unknown aggregator: " + *ov.aggregator);
        spec.federation.aggregator = *agg;
    }
    if (ov.rounds) spec.federation.rounds = *ov.rounds;
    if (ov.out_dir) spec.output_dir = *ov.out_dir;
    spec.validate();
}

std::vector<std::string> variance_layer_names(const ExperimentResult& result) {
    std::vector<std::string> names;
    for (const auto& e : result.final_params.entries) names.push_back(e.name);
    return names;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_run(const std::string& config_path, const Overrides& ov) {
    ExperimentSpec spec = load_experiment_spec(config_path);
    apply_overrides(spec, ov);

    const auto t0 = std::chrono::steady_clock::now();
    DataBundle data = load_data(spec);
    const DatasetPartition partition = build_partition(spec, data.train);
    const MlpArchitecture arch = build_architecture(spec, data.train);

    ExperimentResult result = run_experiment(spec.federation, arch, spec.adam, data.train,
                                             partition, data.test,
                                             spec.record_variance_analysis);

    const std::vector<std::string> layers =
        spec.record_variance_analysis ? variance_layer_names(result) : std::vector<std::string>{};
    write_rounds_csv(spec.output_dir + "/rounds.csv", result.rounds, layers);
    write_summary_json(spec.output_dir + "/summary.json", result.rounds, spec.accuracy_targets,
                       seconds_since(t0));
    if (spec.record_variance_analysis && !result.update_history.empty()) {
        write_variance_tables(spec.output_dir, variance_analysis(result.update_history,
                                                                 spec.federation.aggregation_epsilon));
    }

    if (!result.rounds.empty()) {
        std::cout << "run: " << result.rounds.size() << " rounds, final accuracy "
                  << result.rounds.back().test_accuracy << ", outputs in " << spec.output_dir
                  << "\n";
    } else {
        std::cout << "run: 0 rounds requested, outputs in " << spec.output_dir << "\n";
    }
    return 0;
}

int cmd_compare(const std::string& config_path, const Overrides& ov) {
    ExperimentSpec spec = load_experiment_spec(config_path);
    apply_overrides(spec, ov);
    if (spec.compare_batch_sizes.empty()) {
        throw std::invalid_argument("compare requires compare.batch_sizes in the config");
    }

    DataBundle data = load_data(spec);
    const MlpArchitecture arch = build_architecture(spec, data.train);
    const DatasetPartition partition = build_partition(spec, data.train);

    std::vector<CompareCell> cells;
    for (int batch : spec.compare_batch_sizes) {
        for (Aggregator agg : {Aggregator::FedAvg, Aggregator::PrecisionWeighted}) {
            FederationConfig cfg = spec.federation;
            cfg.batch_size = batch;
            cfg.aggregator = agg;
            ExperimentResult result =
                run_experiment(cfg, arch, spec.adam, data.train, partition, data.test, false);

            std::vector<double> accs;
            for (const auto& r : result.rounds) accs.push_back(r.test_accuracy);
            CompareCell cell;
            cell.aggregator = agg;
            cell.batch_size = batch;
            if (!accs.empty()) {
                double mean = 0.0;
                for (double a : accs) mean += a;
                mean /= static_cast<double>(accs.size());
                double ss = 0.0;
                for (double a : accs) ss += (a - mean) * (a - mean);
                cell.accuracy_mean = mean;
                cell.accuracy_std =
                    accs.size() > 1 ? std::sqrt(ss / static_cast<double>(accs.size() - 1)) : 0.0;
                cell.reliability = accs.size() > 1 ? reliability_index(accs) : 100.0;
            }
            cells.push_back(cell);

            write_rounds_csv(spec.output_dir + "/runs/" + aggregator_name(agg) + "_b" +
                                 std::to_string(batch) + ".csv",
                             result.rounds, {});
            std::cout << "compare: " << aggregator_name(agg) << " B=" << batch << " mean accuracy "
                      << cell.accuracy_mean << "\n";
        }
    }
    write_compare_matrices(spec.output_dir, cells);
    std::cout << "compare: matrices written to " << spec.output_dir << "\n";
    return 0;
}

int cmd_analyze_variance(const std::string& config_path, const Overrides& ov) {
    ExperimentSpec spec = load_experiment_spec(config_path);
    apply_overrides(spec, ov);

    const auto t0 = std::chrono::steady_clock::now();
    DataBundle data = load_data(spec);
    const DatasetPartition partition = build_partition(spec, data.train);
    const MlpArchitecture arch = build_architecture(spec, data.train);

    ExperimentResult result =
        run_experiment(spec.federation, arch, spec.adam, data.train, partition, data.test, true);

    const VarianceAnalysis analysis =
        variance_analysis(result.update_history, spec.federation.aggregation_epsilon);
    write_variance_tables(spec.output_dir, analysis);
    write_rounds_csv(spec.output_dir + "/rounds.csv", result.rounds,
                     variance_layer_names(result));
    write_summary_json(spec.output_dir + "/summary.json", result.rounds, spec.accuracy_targets,
                       seconds_since(t0));

    std::cout << "analyze-variance: " << result.rounds.size() << " rounds over "
              << analysis.client_ids.size() << " clients, tables in " << spec.output_dir << "\n";
    return 0;
}

int cmd_plot(const std::string& csv_path, const std::string& out_dir) {
    const RoundsTable table = read_rounds_csv(csv_path);

    auto column_index = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < table.columns.size(); ++i) {
            if (table.columns[i] == name) return i;
        }
        return std::nullopt;
    };
    const auto round_col = column_index("round");
    const auto acc_col = column_index("test_accuracy");
    if (!round_col || !acc_col) {
        throw FormatError(csv_path + ": missing round/test_accuracy columns");
    }

    PlotSeries acc;
    acc.label = "test_accuracy";
    for (const auto& row : table.rows) {
        acc.x.push_back(row[*round_col]);
        acc.y.push_back(row[*acc_col]);
    }
    write_line_chart_svg(out_dir + "/accuracy_vs_round.svg", "Test accuracy per round",
                         "communication round", "test accuracy", {acc});

    std::vector<PlotSeries> inv_series;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (table.columns[c].rfind("inv_var_", 0) != 0) continue;
        PlotSeries s;
        s.label = table.columns[c].substr(8);
        for (const auto& row : table.rows) {
            s.x.push_back(row[*round_col]);
            s.y.push_back(row[c]);
        }
        inv_series.push_back(std::move(s));
    }
    if (!inv_series.empty()) {
        write_line_chart_svg(out_dir + "/inv_variance_vs_round.svg",
                             "Mean inverse variance per round", "communication round",
                             "mean inverse variance", inv_series);
    }
    std::cout << "plot: wrote " << (inv_series.empty() ? 1 : 2) << " chart(s) to " << out_dir
              << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"fedsim: federated-learning simulation with FedAvg and precision-weighted aggregation"};
    app.require_subcommand(1);

    std::string config_path, csv_path, plot_out = "out";
    Overrides ov;
    std::uint64_t seed_val = 0;
    std::string agg_val;
    int rounds_val = 0;
    std::string out_val;

    auto add_common = [&](CLI::App* sub, bool with_config) {
        if (with_config) {
            sub->add_option("--config", config_path, "experiment config file")->required();
        }
        sub->add_option("--seed", seed_val, "override federation.master_seed");
        sub->add_option("--aggregator", agg_val, "override aggregator (fedavg|pw)");
        sub->add_option("--rounds", rounds_val, "override federation.rounds");
        sub->add_option("--out", out_val, "override output directory");
    };

    CLI::App* run = app.add_subcommand("run", "run one experiment (rounds.csv + summary.json)");
    add_common(run, true);
    CLI::App* compare = app.add_subcommand(
        "compare", "run both aggregators over compare.batch_sizes and emit matrices");
    add_common(compare, true);
    CLI::App* analyze = app.add_subcommand(
        "analyze-variance", "run the unbalanced scenario and emit inverse-variance tables");
    add_common(analyze, true);
    CLI::App* plot = app.add_subcommand("plot", "render SVG charts from a rounds.csv");
    plot->add_option("--csv", csv_path, "rounds.csv to plot")->required();
    plot->add_option("--out", plot_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto collect = [&](CLI::App* sub) {
        if (sub->count("--seed")) ov.seed = seed_val;
        if (sub->count("--aggregator")) ov.aggregator = agg_val;
        if (sub->count("--rounds")) ov.rounds = rounds_val;
        if (sub->count("--out")) ov.out_dir = out_val;
    };

    try {
        if (run->parsed()) {
            collect(run);
            return cmd_run(config_path, ov);
        }
        if (compare->parsed()) {
            collect(compare);
            return cmd_compare(config_path, ov);
        }
        if (analyze->parsed()) {
            collect(analyze);
            return cmd_analyze_variance(config_path, ov);
        }
        if (plot->parsed()) {
            return cmd_plot(csv_path, plot_out);
        }
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace fedsim
