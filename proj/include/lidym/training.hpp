#pragma once

/**
 * @file training.hpp
 * @brief Feature tables, sub-sequence windowing, the train/test split, the
 *        training loop and hybrid prediction F_HYB = F_RBD + F_NN.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lidym/errors.hpp"
#include "lidym/filter.hpp"
#include "lidym/identification.hpp"
#include "lidym/nn/adamw.hpp"
#include "lidym/nn/network.hpp"
#include "lidym/parallel.hpp"
#include "lidym/plant.hpp"
#include "lidym/random.hpp"
#include "lidym/rotation_encoding.hpp"

namespace lidym {

/**
 * Preprocessed samples of every segment of a dataset, joints x samples.
 * r is encoded over the filtered positions of each segment from its start;
 * tau_rbd comes from the identified rigid-body model; target holds the
 * low-pass filtered measured torque.
 */
struct FeatureTable {
    double rate = 100.0;
    Eigen::VectorXd t;
    Eigen::VectorXi segment;
    Eigen::MatrixXd q, qd, qdd, r, tau_rbd, target;
    std::vector<std::pair<int, int>> ranges;  ///< [begin, end) per segment

    int size() const { return static_cast<int>(t.size()); }
    int joints() const { return static_cast<int>(q.rows()); }
};

inline FeatureTable build_feature_table(const Dataset& data, const IdentifiedRbdModel& rbd,
                                        const FilterSpec& filter = {}) {
    if (data.size() == 0) throw ContractError("build_feature_table: empty dataset");
    if (data.joints() != rbd.chain.size()) {
        throw ContractError("dataset has " + std::to_string(data.joints()) + " joints, the RBD model " +
                            std::to_string(rbd.chain.size()));
    }
    std::vector<ObservationSet> parts;
    std::vector<int> ids;
    for (const auto& [begin, end] : data.segment_ranges()) {
        const int len = end - begin;
        if (len < 2 * kTrimSamples + 1) continue;
        parts.push_back(preprocess(data.t.segment(begin, len), data.q.middleCols(begin, len),
                                   data.tau.middleCols(begin, len), data.rate, filter));
        ids.push_back(data.segment(begin));
    }
    if (parts.empty()) throw ContractError("build_feature_table: every segment is too short to preprocess");
    int total = 0;
    for (const auto& p : parts) total += p.size();
    const int n = data.joints();
    FeatureTable f;
    f.rate = data.rate;
    f.t.resize(total);
    f.segment.resize(total);
    for (Eigen::MatrixXd* m : {&f.q, &f.qd, &f.qdd, &f.r, &f.tau_rbd, &f.target}) m->resize(n, total);
    int offset = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const ObservationSet& p = parts[i];
        const int m = p.size();
        f.t.segment(offset, m) = p.t;
        f.segment.segment(offset, m).setConstant(ids[i]);
        f.q.middleCols(offset, m) = p.q;
        f.qd.middleCols(offset, m) = p.qd;
        f.qdd.middleCols(offset, m) = p.qdd;
        f.r.middleCols(offset, m) = encode_trajectory(p.q);
        f.target.middleCols(offset, m) = p.tau;
        f.ranges.emplace_back(offset, offset + m);
        offset += m;
    }
    const std::size_t chunk = 512;
    parallel_for((static_cast<std::size_t>(total) + chunk - 1) / chunk, [&](std::size_t c) {
        const int begin = static_cast<int>(c * chunk);
        const int end = std::min(total, begin + static_cast<int>(chunk));
        for (int k = begin; k < end; ++k) {
            f.tau_rbd.col(k) = predict_rbd(rbd, JointState{f.q.col(k), f.qd.col(k), f.qdd.col(k)});
        }
    });
    return f;
}

/// Raw (unnormalized) network inputs for every sample: q, q̇, q̈, then r and τ_RBD when enabled.
inline Eigen::MatrixXd assemble_features(const FeatureTable& f, const nn::NetworkSpec& spec) {
    if (spec.joints != f.joints()) throw ContractError("network and feature table joint counts differ");
    const int n = f.joints();
    Eigen::MatrixXd x(spec.input_dim(), f.size());
    x.topRows(n) = f.q;
    x.middleRows(n, n) = f.qd;
    x.middleRows(2 * n, n) = f.qdd;
    int row = 3 * n;
    if (spec.use_r) {
        x.middleRows(row, n) = f.r;
        row += n;
    }
    if (spec.use_tau_rbd) x.middleRows(row, n) = f.tau_rbd;
    return x;
}

/// Torque the network is trained to emit: the RBD residual for hybrid models, else the full torque.
inline Eigen::MatrixXd network_targets(const FeatureTable& f, const nn::NetworkSpec& spec) {
    return spec.hybrid_output_add ? Eigen::MatrixXd(f.target - f.tau_rbd) : f.target;
}

/// End indices of all windows of `steps` samples that stay inside one segment.
inline std::vector<int> window_ends(const FeatureTable& f, int steps) {
    if (steps < 1) throw ContractError("window length must be at least 1");
    std::vector<int> ends;
    for (const auto& [begin, end] : f.ranges) {
        for (int k = begin + steps - 1; k < end; ++k) ends.push_back(k);
    }
    return ends;
}

/// Disjoint window sets; holdout is carved from the training share.
struct WindowSplit {
    std::vector<int> train;
    std::vector<int> holdout;
    std::vector<int> test;
};

/**
 * Random split at window granularity: llround(train_fraction * N) windows
 * for training (of which llround(holdout_fraction * n_train) are held out
 * for model selection) and the rest for testing.
 */
inline WindowSplit split_windows(const std::vector<int>& ends, double train_fraction, double holdout_fraction,
                                 std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0) || !(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
        throw ContractError("split fractions must lie in (0, 1) and [0, 1)");
    }
    std::vector<int> order = ends;
    std::mt19937_64 engine(seed);
    std::shuffle(order.begin(), order.end(), engine);
    const auto n = static_cast<long long>(order.size());
    const long long n_train = std::llround(train_fraction * static_cast<double>(n));
    const long long n_holdout = std::llround(holdout_fraction * static_cast<double>(n_train));
    if (n_train - n_holdout < 1 || n - n_train < 1) {
        throw ContractError("degenerate split: " + std::to_string(n) + " windows cannot fill train and test sets");
    }
    WindowSplit s;
    s.train.assign(order.begin(), order.begin() + (n_train - n_holdout));
    s.holdout.assign(order.begin() + (n_train - n_holdout), order.begin() + n_train);
    s.test.assign(order.begin() + n_train, order.end());
    return s;
}

/// Evenly strided subset of at most `limit` entries (all when limit <= 0).
inline std::vector<int> strided_subset(const std::vector<int>& items, int limit) {
    if (limit <= 0 || static_cast<int>(items.size()) <= limit) return items;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(limit));
    const double step = static_cast<double>(items.size()) / limit;
    for (int i = 0; i < limit; ++i) out.push_back(items[static_cast<std::size_t>(std::floor(i * step))]);
    return out;
}

/// Gathers windows into the time-major layout: column t * B + b holds sample ends[b] - T + 1 + t.
inline Eigen::MatrixXd gather_windows(const Eigen::MatrixXd& x, const std::vector<int>& ends, std::size_t first,
                                      std::size_t count, int steps) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(count) * steps);
    const auto batch = static_cast<Eigen::Index>(count);
    for (int t = 0; t < steps; ++t) {
        for (Eigen::Index b = 0; b < batch; ++b) {
            out.col(t * batch + b) = x.col(ends[first + static_cast<std::size_t>(b)] - steps + 1 + t);
        }
    }
    return out;
}

inline Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& x, const std::vector<int>& ends, std::size_t first,
                                      std::size_t count) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(count));
    for (std::size_t b = 0; b < count; ++b) out.col(static_cast<Eigen::Index>(b)) = x.col(ends[first + b]);
    return out;
}

struct TrainConfig {
    int epochs = 30;
    int batch = 50;
    double lr = 1e-3;
    double weight_decay = 0.01;
    int plateau_patience = 3;       ///< epochs without training-loss improvement before decay
    double plateau_factor = 0.5;
    double plateau_tolerance = 1e-9;
    int runs = 2;
    int windows_per_epoch = 0;      ///< training windows drawn per epoch; 0 uses all
    int holdout_windows = 0;        ///< cap on holdout windows scored per epoch; 0 uses all
    bool normalize_outputs = true;  ///< fit the output normalizer; identity otherwise
    std::uint64_t seed = 1;

    void validate() const {
        if (epochs < 1 || batch < 1 || runs < 1 || !(lr > 0.0) || weight_decay < 0.0 || plateau_patience < 1 ||
            !(plateau_factor > 0.0 && plateau_factor <= 1.0)) {
            throw ContractError("invalid training configuration");
        }
    }
};

struct EpochRecord {
    int run = 0;
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
    double lr = 0.0;
};

/// Identified RBD model plus the trained network; prediction follows spec.hybrid_output_add.
struct TrainedHybrid {
    IdentifiedRbdModel rbd;
    nn::Network network;
    std::vector<EpochRecord> history;
    int best_run = 0;
    double best_val_mse = std::numeric_limits<double>::infinity();

    const nn::NetworkSpec& spec() const { return network.spec(); }
};

/// Network output in Nm (τ_NN) for the given windows of a feature table.
inline Eigen::MatrixXd network_output(const nn::Network& net, const Eigen::MatrixXd& normalized,
                                      const std::vector<int>& ends, std::size_t chunk = 256) {
    const int steps = net.spec().steps;
    Eigen::MatrixXd out(net.spec().joints, static_cast<Eigen::Index>(ends.size()));
    const std::size_t blocks = (ends.size() + chunk - 1) / chunk;
    parallel_for(blocks, [&](std::size_t c) {
        const std::size_t first = c * chunk;
        const std::size_t count = std::min(chunk, ends.size() - first);
        out.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)) =
            net.forward(gather_windows(normalized, ends, first, count, steps));
    });
    return out;
}

/// F_HYB on the windows ending at `ends`, joints x windows.
inline Eigen::MatrixXd predict_windows(const TrainedHybrid& model, const FeatureTable& f, const std::vector<int>& ends) {
    const Eigen::MatrixXd x = model.network.input_norm.normalize(assemble_features(f, model.spec()));
    Eigen::MatrixXd y = network_output(model.network, x, ends);
    if (model.spec().hybrid_output_add) y += gather_columns(f.tau_rbd, ends, 0, ends.size());
    return y;
}

namespace detail {

inline double windows_mse(const nn::Network& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& targets,
                          const std::vector<int>& ends) {
    const Eigen::MatrixXd y = network_output(net, x, ends);
    const Eigen::MatrixXd err = y - gather_columns(targets, ends, 0, ends.size());
    return err.squaredNorm() / static_cast<double>(err.size());
}

}  // namespace detail

/**
 * Trains `config.runs` independently initialized networks and keeps the
 * parameters of the best epoch of the best run by holdout MSE. Normalizers
 * are fitted on the training windows' end samples. Each run uses network
 * seed mix_seed(config.seed, run); shuffling uses mix_seed(config.seed, run, epoch).
 */
inline TrainedHybrid train(nn::NetworkSpec spec, const IdentifiedRbdModel& rbd, const FeatureTable& table,
                           const WindowSplit& split, const TrainConfig& config) {
    config.validate();
    spec.validate();
    if (static_cast<int>(split.train.size()) < config.batch) {
        throw ContractError("training split holds " + std::to_string(split.train.size()) +
                            " windows, fewer than one batch of " + std::to_string(config.batch));
    }
    for (const auto* set : {&split.train, &split.holdout, &split.test}) {
        for (int e : *set) {
            if (e < spec.steps - 1 || e >= table.size()) throw ContractError("window end outside the feature table");
        }
    }
    const Eigen::MatrixXd raw = assemble_features(table, spec);
    const Eigen::MatrixXd targets = network_targets(table, spec);
    const nn::Normalizer input_norm = nn::Normalizer::fit(gather_columns(raw, split.train, 0, split.train.size()));
    const nn::Normalizer output_norm =
        config.normalize_outputs ? nn::Normalizer::fit(gather_columns(targets, split.train, 0, split.train.size()))
                                 : nn::Normalizer::identity(spec.joints);
    const Eigen::MatrixXd x = input_norm.normalize(raw);
    const std::vector<int> holdout = strided_subset(split.holdout.empty() ? split.train : split.holdout,
                                                    config.holdout_windows);

    TrainedHybrid best;
    best.rbd = rbd;
    for (int run = 0; run < config.runs; ++run) {
        nn::NetworkSpec run_spec = spec;
        run_spec.seed = mix_seed(config.seed, static_cast<std::uint64_t>(run));
        nn::Network net(run_spec);
        net.input_norm = input_norm;
        net.output_norm = output_norm;
        nn::AdamW opt(nn::AdamWConfig{config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
        const nn::ParameterRefs params = net.parameters();
        double best_train = std::numeric_limits<double>::infinity();
        int stagnant = 0;
        std::vector<int> order = split.train;
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            std::mt19937_64 engine(mix_seed(config.seed, static_cast<std::uint64_t>(run),
                                            static_cast<std::uint64_t>(epoch)));
            std::shuffle(order.begin(), order.end(), engine);
            std::size_t used = order.size();
            if (config.windows_per_epoch > 0) used = std::min(used, static_cast<std::size_t>(config.windows_per_epoch));
            double sum = 0.0;
            std::size_t seen = 0;
            for (std::size_t first = 0; first < used; first += static_cast<std::size_t>(config.batch)) {
                const std::size_t count = std::min(static_cast<std::size_t>(config.batch), used - first);
                const double loss = net.loss_and_grad(gather_windows(x, order, first, count, spec.steps),
                                                      gather_columns(targets, order, first, count));
                opt.step(params);
                sum += loss * static_cast<double>(count);
                seen += count;
            }
            const double train_mse = sum / static_cast<double>(seen);
            const double val_mse = detail::windows_mse(net, x, targets, holdout);
            if (!std::isfinite(val_mse)) throw TrainingFault("non-finite holdout loss");
            best.history.push_back({run, epoch + 1, train_mse, val_mse, opt.config().lr});
            if (val_mse < best.best_val_mse) {
                best.best_val_mse = val_mse;
                best.best_run = run;
                best.network = net;
            }
            if (train_mse < best_train - config.plateau_tolerance) {
                best_train = train_mse;
                stagnant = 0;
            } else if (++stagnant >= config.plateau_patience) {
                opt.config().lr *= config.plateau_factor;
                stagnant = 0;
            }
        }
    }
    return best;
}

/**
 * Streaming F_HYB: push one kinematic sample at a time; the rotation encoder
 * runs from the first pushed sample and predictions need T samples.
 */
class HybridPredictor {
public:
    explicit HybridPredictor(const TrainedHybrid& model)
        : model_(&model), encoder_(RotationHistoryState::fresh(model.spec().joints)) {}

    void push(const JointState& s) {
        const int n = model_->spec().joints;
        if (s.q.size() != n || s.qd.size() != n || s.qdd.size() != n) {
            throw ContractError("hybrid predictor expects " + std::to_string(n) + " joints");
        }
        const Eigen::VectorXd r = encoder_update(encoder_, s.q);
        const Eigen::VectorXd tau_rbd = predict_rbd(model_->rbd, s);
        Eigen::VectorXd x(model_->spec().input_dim());
        x.head(3 * n) << s.q, s.qd, s.qdd;
        Eigen::Index row = 3 * n;
        if (model_->spec().use_r) {
            x.segment(row, n) = r;
            row += n;
        }
        if (model_->spec().use_tau_rbd) x.segment(row, n) = tau_rbd;
        window_.push_back(model_->network.input_norm.normalize(x));
        last_rbd_ = tau_rbd;
        if (static_cast<int>(window_.size()) > model_->spec().steps) window_.pop_front();
    }

    bool ready() const { return static_cast<int>(window_.size()) == model_->spec().steps; }

    /// τ_HYB for the latest sample [Nm].
    Eigen::VectorXd predict() const {
        if (!ready()) {
            throw ContractError("hybrid prediction needs " + std::to_string(model_->spec().steps) +
                                " samples, have " + std::to_string(window_.size()));
        }
        Eigen::MatrixXd x(model_->spec().input_dim(), model_->spec().steps);
        for (int t = 0; t < model_->spec().steps; ++t) x.col(t) = window_[static_cast<std::size_t>(t)];
        Eigen::VectorXd y = model_->network.forward(x).col(0);
        if (model_->spec().hybrid_output_add) y += last_rbd_;
        return y;
    }

    /// RBD prediction of the latest sample.
    const Eigen::VectorXd& rbd() const { return last_rbd_; }

private:
    const TrainedHybrid* model_;
    RotationHistoryState encoder_;
    std::deque<Eigen::VectorXd> window_;
    Eigen::VectorXd last_rbd_;
};

/// τ_HYB at the last column of a raw window (joints x T each); r is encoded from the window start.
inline Eigen::VectorXd hybrid_predict(const TrainedHybrid& model, const Eigen::MatrixXd& q, const Eigen::MatrixXd& qd,
                                      const Eigen::MatrixXd& qdd) {
    if (q.cols() != model.spec().steps || qd.cols() != q.cols() || qdd.cols() != q.cols()) {
        throw ContractError("hybrid_predict: window must hold exactly T = " + std::to_string(model.spec().steps) +
                            " samples of q, qd and qdd");
    }
    HybridPredictor p(model);
    for (Eigen::Index t = 0; t < q.cols(); ++t) p.push(JointState{q.col(t), qd.col(t), qdd.col(t)});
    return p.predict();
}

// ---------------------------------------------------------------------------
// Persistence

inline TextDocument hybrid_document(const TrainedHybrid& model) {
    TextDocument doc = rbd_model_document(model.rbd);
    nn::Network net = model.network;
    nn::append_network(doc, net);
    auto& s = doc.add("training");
    s.set("best_run", std::to_string(model.best_run));
    s.set("best_val_mse", format_double(model.best_val_mse));
    return doc;
}

inline void save_hybrid(const std::string& path, const TrainedHybrid& model) { hybrid_document(model).save(path); }

inline TrainedHybrid load_hybrid(const std::string& path) {
    const TextDocument doc = TextDocument::load(path);
    TrainedHybrid model;
    model.rbd = rbd_model_from_document(doc, path);
    model.network = nn::network_from_document(doc);
    const TextSection s = doc.section_or_empty("training");
    model.best_run = static_cast<int>(s.get_int("best_run", 0));
    model.best_val_mse = s.get_double("best_val_mse", std::numeric_limits<double>::infinity());
    if (model.network.spec().joints != model.rbd.chain.size()) {
        throw IoError(path + ": network and RBD model joint counts differ");
    }
    return model;
}

/// Training log CSV `epoch,train_mse,val_mse,lr` of one run, or of every run when run < 0.
inline std::string training_log_csv(const std::vector<EpochRecord>& history, int run = -1) {
    std::ostringstream out;
    out << "epoch,train_mse,val_mse,lr\n";
    for (const auto& h : history) {
        if (run >= 0 && h.run != run) continue;
        out << h.epoch << ',' << format_double(h.train_mse) << ',' << format_double(h.val_mse) << ','
            << format_double(h.lr) << '\n';
    }
    return out.str();
}

}  // namespace lidym
