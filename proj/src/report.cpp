#include "fedsim/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fedsim/errors.hpp"

namespace fedsim {

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string join_participants(const std::vector<int>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(ids[i]);
    }
    return out;
}

std::ofstream open_for_write(const std::string& path) {
    const auto dir = std::filesystem::path(path).parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

std::string csv_cell(double v) { return std::isnan(v) ? "" : format_g17(v); }

}  // namespace

void write_rounds_csv(const std::string& path, const std::vector<RoundRecord>& records,
                      const std::vector<std::string>& layer_names) {
    std::ofstream out = open_for_write(path);
    out << "round,aggregator,batch_size,test_accuracy,test_loss,participants";
    for (const auto& layer : layer_names) out << ",inv_var_" << layer;
    out << "\n";
    for (const auto& rec : records) {
        out << rec.round << ',' << aggregator_name(rec.aggregator) << ',' << rec.batch_size << ','
            << format_g17(rec.test_accuracy) << ',' << format_g17(rec.test_loss) << ','
            << join_participants(rec.participants);
        for (const auto& layer : layer_names) {
            double value = std::numeric_limits<double>::quiet_NaN();
            for (const auto& [name, v] : rec.per_layer_mean_inv_variance) {
                if (name == layer) {
                    value = v;
                    break;
                }
            }
            out << ',' << csv_cell(value);
        }
        out << "\n";
    }
    if (!out) throw IoError("failed writing " + path);
}

void write_summary_json(const std::string& path, const std::vector<RoundRecord>& records,
                        const std::vector<double>& targets, double wall_clock_seconds) {
    nlohmann::json j;
    double final_acc = 0.0, max_acc = 0.0;
    std::vector<double> accuracies;
    accuracies.reserve(records.size());
    for (const auto& rec : records) {
        accuracies.push_back(rec.test_accuracy);
        max_acc = std::max(max_acc, rec.test_accuracy);
    }
    if (!records.empty()) final_acc = records.back().test_accuracy;

    j["rounds"] = records.size();
    j["final_accuracy"] = final_acc;
    j["max_accuracy"] = max_acc;
    if (accuracies.size() >= 2) {
        j["reliability_index"] = reliability_index(accuracies);
    } else {
        j["reliability_index"] = nullptr;
    }
    nlohmann::json rt = nlohmann::json::object();
    for (double target : targets) {
        char key[32];
        std::snprintf(key, sizeof(key), "%g", target);
        const auto reached = rounds_to_target(records, target);
        if (reached) {
            rt[key] = *reached;
        } else {
            rt[key] = nullptr;
        }
    }
    j["rounds_to_target"] = rt;
    j["wall_clock_seconds"] = wall_clock_seconds;

    std::ofstream out = open_for_write(path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing " + path);
}

void write_compare_matrices(const std::string& dir, const std::vector<CompareCell>& cells) {
    std::map<int, std::map<Aggregator, const CompareCell*>> by_batch;
    for (const auto& c : cells) by_batch[c.batch_size][c.aggregator] = &c;

    {
        std::ofstream out = open_for_write(dir + "/accuracy_matrix.csv");
        out << "batch_size,fedavg_mean,fedavg_std,pw_mean,pw_std\n";
        for (const auto& [batch, row] : by_batch) {
            out << batch;
            for (Aggregator a : {Aggregator::FedAvg, Aggregator::PrecisionWeighted}) {
                auto it = row.find(a);
                if (it == row.end()) {
                    out << ",,";
                } else {
                    out << ',' << format_g17(it->second->accuracy_mean) << ','
                        << format_g17(it->second->accuracy_std);
                }
            }
            out << "\n";
        }
        if (!out) throw IoError("failed writing compare accuracy matrix");
    }
    {
        std::ofstream out = open_for_write(dir + "/reliability_matrix.csv");
        out << "batch_size,fedavg_xi,pw_xi\n";
        std::map<Aggregator, std::vector<double>> columns;
        for (const auto& [batch, row] : by_batch) {
            out << batch;
            for (Aggregator a : {Aggregator::FedAvg, Aggregator::PrecisionWeighted}) {
                auto it = row.find(a);
                if (it == row.end()) {
                    out << ',';
                } else {
                    out << ',' << format_g17(it->second->reliability);
                    columns[a].push_back(it->second->reliability);
                }
            }
            out << "\n";
        }
        out << "overall";
        for (Aggregator a : {Aggregator::FedAvg, Aggregator::PrecisionWeighted}) {
            auto it = columns.find(a);
            if (it == columns.end() || it->second.empty()) {
                out << ',';
            } else {
                out << ',' << format_g17(overall_reliability(it->second));
            }
        }
        out << "\n";
        if (!out) throw IoError("failed writing compare reliability matrix");
    }
}

void write_variance_tables(const std::string& dir, const VarianceAnalysis& analysis) {
    auto client_header = [&](std::ofstream& out, const char* first) {
        out << first;
        for (int id : analysis.client_ids) out << ",client_" << id;
        out << "\n";
    };
    {
        std::ofstream out = open_for_write(dir + "/variance_by_round.csv");
        client_header(out, "round");
        for (std::size_t r = 0; r < analysis.mean_inv_variance.size(); ++r) {
            out << (r + 1);
            for (double v : analysis.mean_inv_variance[r]) out << ',' << csv_cell(v);
            out << "\n";
        }
    }
    {
        std::ofstream out = open_for_write(dir + "/variance_by_round_normalized.csv");
        client_header(out, "round");
        for (std::size_t r = 0; r < analysis.normalized.size(); ++r) {
            out << (r + 1);
            for (double v : analysis.normalized[r]) out << ',' << csv_cell(v);
            out << "\n";
        }
    }
    {
        std::ofstream out = open_for_write(dir + "/round1_per_layer.csv");
        client_header(out, "layer");
        for (std::size_t l = 0; l < analysis.layer_names.size(); ++l) {
            out << analysis.layer_names[l];
            for (double v : analysis.round1_per_layer[l]) out << ',' << csv_cell(v);
            out << "\n";
        }
    }
    {
        std::ofstream out = open_for_write(dir + "/round1_per_layer_normalized.csv");
        client_header(out, "layer");
        for (std::size_t l = 0; l < analysis.layer_names.size(); ++l) {
            out << analysis.layer_names[l];
            for (double v : analysis.round1_per_layer_normalized[l]) out << ',' << csv_cell(v);
            out << "\n";
        }
    }
}

RoundsTable read_rounds_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    RoundsTable table;
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) table.columns.push_back(cell);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                double v = std::stod(cell, &pos);
                row.push_back(pos == cell.size() ? v : std::numeric_limits<double>::quiet_NaN());
            } catch (const std::exception&) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
        row.resize(table.columns.size(), std::numeric_limits<double>::quiet_NaN());
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace fedsim
