#pragma once

/**
 * @file evaluation.hpp
 * @brief Per-joint MSE reports, the ablation grid and report rendering.
 */

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lidym/csv.hpp"
#include "lidym/errors.hpp"
#include "lidym/training.hpp"

namespace lidym {

/// One model on one split: MSE per joint [Nm^2] against the filtered torque.
struct EvalRow {
    std::string variant;
    std::string split;  ///< train, test or validation
    std::string topology = "rbd";
    int steps = 1;
    bool tau_rbd = false;
    bool r = false;
    bool hybrid = false;
    int windows = 0;
    Eigen::VectorXd mse;
    double average = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
};

struct EvalReport {
    std::vector<EvalRow> rows;

    const EvalRow* find(const std::string& variant, const std::string& split) const {
        for (const auto& r : rows) {
            if (r.variant == variant && r.split == split) return &r;
        }
        return nullptr;
    }

    /// Joint-average MSE of a row; throws ContractError when the row is absent.
    double average(const std::string& variant, const std::string& split) const {
        const EvalRow* r = find(variant, split);
        if (!r) throw ContractError("report has no row '" + variant + "' on split '" + split + "'");
        return r->average;
    }
};

/// Fills mse and average from predictions and targets (joints x windows).
inline void score_row(EvalRow& row, const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& target) {
    if (prediction.rows() != target.rows() || prediction.cols() != target.cols() || target.cols() == 0) {
        throw ContractError("score_row: prediction and target shapes differ or are empty");
    }
    row.windows = static_cast<int>(target.cols());
    row.mse = (prediction - target).array().square().rowwise().mean();
    row.average = row.mse.mean();
}

inline EvalRow evaluate_rbd(const FeatureTable& f, const std::vector<int>& ends, const std::string& split) {
    EvalRow row;
    row.variant = "RBD";
    row.split = split;
    score_row(row, gather_columns(f.tau_rbd, ends, 0, ends.size()), gather_columns(f.target, ends, 0, ends.size()));
    return row;
}

inline EvalRow evaluate(const TrainedHybrid& model, const FeatureTable& f, const std::vector<int>& ends,
                        const std::string& split) {
    const nn::NetworkSpec& spec = model.spec();
    if (spec.joints != f.joints()) {
        throw ContractError("model expects " + std::to_string(spec.joints) + " joints, dataset has " +
                            std::to_string(f.joints()));
    }
    for (int e : ends) {
        if (e < spec.steps - 1 || e >= f.size()) {
            throw ContractError("evaluation window ending at " + std::to_string(e) + " does not fit T = " +
                                std::to_string(spec.steps));
        }
    }
    EvalRow row;
    row.variant = spec.label();
    row.split = split;
    row.topology = nn::to_string(spec.topology);
    row.steps = spec.steps;
    row.tau_rbd = spec.use_tau_rbd;
    row.r = spec.use_r;
    row.hybrid = spec.hybrid_output_add;
    score_row(row, predict_windows(model, f, ends), gather_columns(f.target, ends, 0, ends.size()));
    return row;
}

// ---------------------------------------------------------------------------
// Ablation grid

struct AblationVariant {
    bool rbd_only = false;
    nn::NetworkSpec spec;

    std::string name() const { return rbd_only ? "RBD" : spec.label(); }
};

/**
 * The fourteen-row grid: RBD; MLP-7 (standalone, with tau_RBD, with tau_RBD, r);
 * LSTM-2 at t_short (standalone, with tau_RBD, with tau_RBD, r); LSTM-FCL at
 * t_short (standalone, with r, with tau_RBD, r) and t_long (standalone, with
 * tau_RBD, with tau_RBD, r); Transformer at t_long with tau_RBD, r.
 */
inline std::vector<AblationVariant> standard_grid(int t_short, int t_long, const nn::NetworkSpec& widths = {}) {
    auto make = [&](nn::Topology topo, int steps, bool tau, bool r) {
        AblationVariant v;
        v.spec = widths;
        v.spec.topology = topo;
        v.spec.steps = topo == nn::Topology::mlp7 ? 1 : steps;
        v.spec.use_tau_rbd = tau;
        v.spec.hybrid_output_add = tau;
        v.spec.use_r = r;
        return v;
    };
    using nn::Topology;
    std::vector<AblationVariant> grid(1);
    grid[0].rbd_only = true;
    grid.push_back(make(Topology::mlp7, 1, false, false));
    grid.push_back(make(Topology::mlp7, 1, true, false));
    grid.push_back(make(Topology::mlp7, 1, true, true));
    grid.push_back(make(Topology::lstm2, t_short, false, false));
    grid.push_back(make(Topology::lstm2, t_short, true, false));
    grid.push_back(make(Topology::lstm2, t_short, true, true));
    grid.push_back(make(Topology::lstm_fcl, t_short, false, false));
    grid.push_back(make(Topology::lstm_fcl, t_short, false, true));
    grid.push_back(make(Topology::lstm_fcl, t_short, true, true));
    grid.push_back(make(Topology::lstm_fcl, t_long, false, false));
    grid.push_back(make(Topology::lstm_fcl, t_long, true, false));
    grid.push_back(make(Topology::lstm_fcl, t_long, true, true));
    grid.push_back(make(Topology::transformer, t_long, true, true));
    return grid;
}

struct AblationConfig {
    TrainConfig train;
    double train_fraction = 0.8;
    double holdout_fraction = 0.1;
    int sequence_windows_per_epoch = 0;     ///< overrides train.windows_per_epoch for LSTM models when > 0
    int transformer_windows_per_epoch = 0;  ///< overrides it for the Transformer when > 0
    int eval_windows = 0;                   ///< cap per split on scored windows; 0 scores all
};

/// Called after each variant with its trained model (null for RBD or on a fault) and its rows.
using AblationObserver =
    std::function<void(const AblationVariant&, const TrainedHybrid*, const std::vector<EvalRow>&)>;

inline std::uint64_t name_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Training settings of one variant: per-topology window caps and a seed derived from the variant name.
inline TrainConfig variant_train_config(const AblationConfig& config, const AblationVariant& variant,
                                        std::uint64_t seed) {
    TrainConfig tc = config.train;
    tc.seed = mix_seed(seed, name_hash(variant.name()));
    if (variant.spec.topology == nn::Topology::transformer && config.transformer_windows_per_epoch > 0) {
        tc.windows_per_epoch = config.transformer_windows_per_epoch;
    } else if (variant.spec.sequence() && config.sequence_windows_per_epoch > 0) {
        tc.windows_per_epoch = config.sequence_windows_per_epoch;
    }
    return tc;
}

/**
 * Trains and scores every grid variant on one shared window split of `data`
 * (windows sized for the longest variant, so every model sees the same
 * end samples). Rows are emitted per variant for train, test and, when a
 * validation table is given, validation. Training faults are recorded in the
 * row status and the run continues.
 */
inline EvalReport run_ablation(const std::vector<AblationVariant>& grid, const IdentifiedRbdModel& rbd,
                               const FeatureTable& data, const FeatureTable* validation, const AblationConfig& config,
                               std::uint64_t seed, const AblationObserver& observer = {}) {
    if (grid.empty()) throw ContractError("ablation grid is empty");
    int t_max = 1;
    for (const auto& v : grid) {
        if (!v.rbd_only) {
            v.spec.validate();
            t_max = std::max(t_max, v.spec.steps);
        }
    }
    const WindowSplit split =
        split_windows(window_ends(data, t_max), config.train_fraction, config.holdout_fraction, mix_seed(seed, 0));
    const std::vector<std::pair<std::string, std::vector<int>>> scored = [&] {
        std::vector<std::pair<std::string, std::vector<int>>> s{
            {"train", strided_subset(split.train, config.eval_windows)},
            {"test", strided_subset(split.test, config.eval_windows)}};
        if (validation) s.emplace_back("validation", strided_subset(window_ends(*validation, t_max), config.eval_windows));
        return s;
    }();

    EvalReport report;
    for (const auto& variant : grid) {
        std::vector<EvalRow> rows;
        if (variant.rbd_only) {
            for (const auto& [name, ends] : scored) {
                rows.push_back(evaluate_rbd(name == "validation" ? *validation : data, ends, name));
            }
            if (observer) observer(variant, nullptr, rows);
        } else {
            const TrainConfig tc = variant_train_config(config, variant, seed);
            try {
                const TrainedHybrid model = train(variant.spec, rbd, data, split, tc);
                for (const auto& [name, ends] : scored) {
                    rows.push_back(evaluate(model, name == "validation" ? *validation : data, ends, name));
                }
                if (observer) observer(variant, &model, rows);
            } catch (const TrainingFault& e) {
                for (const auto& [name, ends] : scored) {
                    EvalRow row;
                    row.variant = variant.name();
                    row.split = name;
                    row.topology = nn::to_string(variant.spec.topology);
                    row.steps = variant.spec.steps;
                    row.tau_rbd = variant.spec.use_tau_rbd;
                    row.r = variant.spec.use_r;
                    row.hybrid = variant.spec.hybrid_output_add;
                    row.mse = Eigen::VectorXd::Constant(data.joints(), std::numeric_limits<double>::quiet_NaN());
                    row.status = std::string("training fault: ") + e.what();
                    rows.push_back(row);
                }
                if (observer) observer(variant, nullptr, rows);
            }
        }
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }
    return report;
}

// ---------------------------------------------------------------------------
// Rendering

/// CSV: variant,split,topology,steps,tau_rbd,r,hybrid,windows,mse_1..mse_n,mse_avg,status
inline std::string report_csv(const EvalReport& report) {
    const Eigen::Index n = report.rows.empty() ? 0 : report.rows.front().mse.size();
    std::ostringstream out;
    out << "variant,split,topology,steps,tau_rbd,r,hybrid,windows";
    for (Eigen::Index j = 0; j < n; ++j) out << ",mse_" << j + 1;
    out << ",mse_avg,status\n";
    for (const auto& row : report.rows) {
        if (row.mse.size() != n) throw ContractError("report rows disagree on the joint count");
        out << csv_field(row.variant) << ',' << row.split << ',' << row.topology << ',' << row.steps << ','
            << row.tau_rbd << ',' << row.r << ',' << row.hybrid << ',' << row.windows;
        for (Eigen::Index j = 0; j < n; ++j) out << ',' << format_double(row.mse(j));
        out << ',' << format_double(row.average) << ',' << csv_field(row.status) << '\n';
    }
    return out.str();
}

inline EvalReport report_from_csv(const CsvTable& table) {
    int joints = 0;
    while (table.column_index("mse_" + std::to_string(joints + 1)) >= 0) ++joints;
    for (const char* col : {"variant", "split", "mse_avg"}) table.require_column(col);
    EvalReport report;
    auto text = [&](const std::vector<std::string>& row, const char* col, const std::string& fallback = "") {
        const int c = table.column_index(col);
        return c >= 0 ? row[static_cast<std::size_t>(c)] : fallback;
    };
    for (const auto& cells : table.rows) {
        EvalRow r;
        r.variant = text(cells, "variant");
        r.split = text(cells, "split");
        r.topology = text(cells, "topology", "rbd");
        r.steps = std::stoi(text(cells, "steps", "1"));
        r.tau_rbd = text(cells, "tau_rbd", "0") == "1";
        r.r = text(cells, "r", "0") == "1";
        r.hybrid = text(cells, "hybrid", "0") == "1";
        r.windows = std::stoi(text(cells, "windows", "0"));
        r.mse.resize(joints);
        for (int j = 0; j < joints; ++j) r.mse(j) = parse_double(text(cells, ("mse_" + std::to_string(j + 1)).c_str()));
        r.average = parse_double(text(cells, "mse_avg"));
        r.status = text(cells, "status", "ok");
        report.rows.push_back(std::move(r));
    }
    return report;
}

inline EvalReport load_report(const std::string& path) { return report_from_csv(read_csv(path)); }

/// Aligned markdown table per split, in row order.
inline std::string report_markdown(const EvalReport& report, int precision = 4) {
    std::vector<std::string> splits;
    for (const auto& r : report.rows) {
        if (std::find(splits.begin(), splits.end(), r.split) == splits.end()) splits.push_back(r.split);
    }
    auto number = [&](double v) {
        if (!std::isfinite(v)) return std::string("n/a");
        std::ostringstream s;
        s << std::fixed << std::setprecision(precision) << v;
        return s.str();
    };
    std::ostringstream out;
    for (const auto& split : splits) {
        std::vector<std::vector<std::string>> cells;
        const Eigen::Index n = report.rows.front().mse.size();
        std::vector<std::string> header{"Model"};
        for (Eigen::Index j = 0; j < n; ++j) header.push_back("J" + std::to_string(j + 1));
        header.push_back("Avg");
        cells.push_back(header);
        for (const auto& r : report.rows) {
            if (r.split != split) continue;
            std::vector<std::string> line{r.variant};
            for (Eigen::Index j = 0; j < n; ++j) line.push_back(number(r.mse(j)));
            line.push_back(number(r.average));
            cells.push_back(line);
        }
        std::vector<std::size_t> width(header.size(), 3);
        for (const auto& line : cells) {
            for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
        }
        out << "### " << split << " MSE [Nm^2]\n\n";
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << '|';
            for (std::size_t c = 0; c < cells[i].size(); ++c) {
                const std::string& s = cells[i][c];
                const std::string pad(width[c] - s.size(), ' ');
                out << ' ' << (c == 0 ? s + pad : pad + s) << " |";
            }
            out << '\n';
            if (i == 0) {
                out << '|';
                for (std::size_t c = 0; c < width.size(); ++c) {
                    out << (c == 0 ? " " + std::string(width[c], '-') + " |" : " " + std::string(width[c] - 1, '-') + ": |");
                }
                out << '\n';
            }
        }
        out << '\n';
    }
    return out.str();
}

/// Tidy plot data: t,joint,model,tau_meas,tau_pred for the samples `ends` of a feature table.
inline std::string plot_csv(const FeatureTable& f, const std::vector<int>& ends,
                            const std::vector<std::pair<std::string, Eigen::MatrixXd>>& predictions) {
    std::ostringstream out;
    out << "t,joint,model,tau_meas,tau_pred\n";
    for (const auto& [name, pred] : predictions) {
        if (pred.cols() != static_cast<Eigen::Index>(ends.size())) {
            throw ContractError("plot data: prediction count differs from the sample count");
        }
        for (Eigen::Index j = 0; j < pred.rows(); ++j) {
            for (std::size_t k = 0; k < ends.size(); ++k) {
                out << format_double(f.t(ends[k])) << ',' << j + 1 << ',' << csv_field(name) << ','
                    << format_double(f.target(j, ends[k])) << ',' << format_double(pred(j, static_cast<Eigen::Index>(k)))
                    << '\n';
            }
        }
    }
    return out.str();
}

}  // namespace lidym
