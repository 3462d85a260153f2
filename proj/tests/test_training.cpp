#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "lidym/experiment.hpp"
#include "lidym/training.hpp"
#include "toy_models.hpp"

using namespace lidym;
using namespace lidym::test;

TEST(Windows, SplitCountsExact) {
    std::vector<int> ends(1000);
    std::iota(ends.begin(), ends.end(), 0);
    const WindowSplit s = split_windows(ends, 0.8, 0.0, 7);
    EXPECT_EQ(s.train.size(), 800u);
    EXPECT_EQ(s.test.size(), 200u);
    EXPECT_TRUE(s.holdout.empty());
    const WindowSplit h = split_windows(ends, 0.8, 0.1, 7);
    EXPECT_EQ(h.train.size() + h.holdout.size(), 800u);
    EXPECT_EQ(h.holdout.size(), 80u);
    std::set<int> all(h.train.begin(), h.train.end());
    all.insert(h.holdout.begin(), h.holdout.end());
    all.insert(h.test.begin(), h.test.end());
    EXPECT_EQ(all.size(), 1000u);
    EXPECT_EQ(split_windows(ends, 0.8, 0.1, 7).test, h.test);
    EXPECT_NE(split_windows(ends, 0.8, 0.1, 8).test, h.test);
}

TEST(Windows, DegenerateSplitRejected) {
    EXPECT_THROW(split_windows({1}, 0.8, 0.0, 1), ContractError);
    EXPECT_THROW(split_windows({1, 2, 3}, 1.0, 0.0, 1), ContractError);
    EXPECT_THROW(split_windows({1, 2, 3}, 0.5, -0.1, 1), ContractError);
}

TEST(Windows, NeverCrossSegments) {
    const FeatureTable f = toy_table(2, 3, 40, 1);
    for (int steps : {1, 5, 40}) {
        const auto ends = window_ends(f, steps);
        EXPECT_EQ(ends.size(), static_cast<std::size_t>(3 * (40 - steps + 1)));
        for (int e : ends) EXPECT_EQ(f.segment(e - steps + 1), f.segment(e));
    }
    EXPECT_TRUE(window_ends(f, 41).empty());
}

TEST(Windows, GatherIsTimeMajor) {
    Eigen::MatrixXd x(1, 10);
    for (int k = 0; k < 10; ++k) x(0, k) = k;
    const Eigen::MatrixXd g = gather_windows(x, {4, 9}, 0, 2, 3);
    Eigen::RowVectorXd expected(6);
    expected << 2, 7, 3, 8, 4, 9;
    EXPECT_EQ(g.row(0), expected);
}

TEST(Features, GroupOrderAndDimensions) {
    const FeatureTable f = toy_table(7, 1, 10, 2);
    nn::NetworkSpec s = mlp_spec(7, true, true);
    const Eigen::MatrixXd x = assemble_features(f, s);
    EXPECT_EQ(x.rows(), 35);
    EXPECT_EQ(x.middleRows(21, 7), f.r);
    EXPECT_EQ(x.middleRows(28, 7), f.tau_rbd);
    s.use_tau_rbd = false;
    EXPECT_EQ(assemble_features(f, s).rows(), 28);
    s.use_r = false;
    EXPECT_EQ(assemble_features(f, s).rows(), 21);
    EXPECT_EQ(assemble_features(f, s).middleRows(7, 7), f.qd);
}

TEST(Features, TableFromDatasetKeepsSegmentsApart) {
    const RobotChain chain = reference_chain();
    const PlantModel plant = PlantModel::with_defaults(chain, reference_parameters());
    LimopaConfig lc;
    lc.scaffolds = 2;
    lc.exploration.length_min = 100;
    lc.exploration.length_max = 120;
    Dataset d = generate_dataset(plant, generate_limo_path(chain, lc, 3), 100.0, 1, 3);
    d.append(generate_dataset(plant, generate_limo_path(chain, lc, 4), 100.0, 2, 4));
    IdentifiedRbdModel rbd = toy_rbd(7);
    rbd.chain = chain;
    rbd.base = structural_base(chain);
    rbd.phi_b = rbd.base.map * reference_parameters();
    const FeatureTable f = build_feature_table(d, rbd);
    ASSERT_EQ(f.ranges.size(), 2u);
    EXPECT_EQ(f.size(), d.size() - 4 * kTrimSamples);
    EXPECT_EQ(f.r.col(f.ranges[1].first), Eigen::VectorXd::Zero(7));
    EXPECT_LE(f.r.cwiseAbs().maxCoeff(), kRotationClamp);
    const int k = f.ranges[1].first + 10;
    EXPECT_LT((f.tau_rbd.col(k) - rnea(chain, reference_parameters(), JointState{f.q.col(k), f.qd.col(k), f.qdd.col(k)}))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-9);
    EXPECT_THROW(build_feature_table(d, toy_rbd(3)), ContractError);
}

TEST(Training, LossNonIncreasingOnLinearTarget) {
    const FeatureTable f = toy_table(1, 1, 200, 3);
    const auto ends = window_ends(f, 1);
    WindowSplit split;
    split.train = ends;
    TrainConfig c;
    c.epochs = 200;
    c.batch = 200;
    c.runs = 1;
    c.lr = 1e-3;
    c.weight_decay = 0.0;
    const TrainedHybrid m = train(mlp_spec(1, false, false), toy_rbd(1), f, split, c);
    ASSERT_EQ(m.history.size(), 200u);
    for (std::size_t e = 1; e < m.history.size(); ++e) {
        EXPECT_LE(m.history[e].train_mse, m.history[e - 1].train_mse + 1e-9) << "epoch " << e + 1;
    }
    EXPECT_LT(m.history.back().train_mse, 0.5 * m.history.front().train_mse);
}

TEST(Training, OutputNormalizationPreservesArgmin) {
    const FeatureTable f = toy_table(1, 1, 100, 4, 0.8, 0.3);
    WindowSplit split;
    split.train = window_ends(f, 1);
    TrainConfig c;
    c.epochs = 8000;
    c.batch = 100;
    c.runs = 1;
    c.lr = 1e-2;
    c.weight_decay = 0.0;
    c.plateau_patience = 20;
    const TrainedHybrid normalized = train(mlp_spec(1, false, false), toy_rbd(1), f, split, c);
    c.normalize_outputs = false;
    const TrainedHybrid raw = train(mlp_spec(1, false, false), toy_rbd(1), f, split, c);
    const Eigen::MatrixXd a = predict_windows(normalized, f, split.train);
    const Eigen::MatrixXd b = predict_windows(raw, f, split.train);
    const double n = static_cast<double>(a.size());
    EXPECT_LT(std::sqrt((a - f.target).squaredNorm() / n), 1e-3);
    EXPECT_LT(std::sqrt((b - f.target).squaredNorm() / n), 1e-3);
    EXPECT_LT(std::sqrt((a - b).squaredNorm() / n), 1e-3);
}

TEST(Training, DeterministicPerSeed) {
    const FeatureTable f = toy_table(2, 2, 60, 5);
    const WindowSplit split = split_windows(window_ends(f, 4), 0.8, 0.2, 1);
    TrainConfig c;
    c.epochs = 3;
    c.batch = 10;
    c.runs = 2;
    const TrainedHybrid a = train(lstm_spec(2, 4, true, true), toy_rbd(2), f, split, c);
    const TrainedHybrid b = train(lstm_spec(2, 4, true, true), toy_rbd(2), f, split, c);
    ASSERT_EQ(a.history.size(), 6u);
    for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].train_mse, b.history[i].train_mse);
    EXPECT_EQ(predict_windows(a, f, split.test), predict_windows(b, f, split.test));
    c.seed = 2;
    const TrainedHybrid d = train(lstm_spec(2, 4, true, true), toy_rbd(2), f, split, c);
    EXPECT_NE(d.history.front().train_mse, a.history.front().train_mse);
}

TEST(Training, BestEpochKeptByHoldout) {
    const FeatureTable f = toy_table(2, 1, 300, 6);
    const WindowSplit split = split_windows(window_ends(f, 1), 0.8, 0.2, 1);
    TrainConfig c;
    c.epochs = 8;
    c.batch = 20;
    c.runs = 2;
    const TrainedHybrid m = train(mlp_spec(2, false, false), toy_rbd(2), f, split, c);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& h : m.history) best = std::min(best, h.val_mse);
    EXPECT_DOUBLE_EQ(m.best_val_mse, best);
    const Eigen::MatrixXd err = predict_windows(m, f, split.holdout) - gather_columns(f.target, split.holdout, 0, split.holdout.size());
    EXPECT_NEAR(err.squaredNorm() / static_cast<double>(err.size()), best, 1e-12);
}

TEST(Training, LearningRateHalvesOnPlateau) {
    FeatureTable f = toy_table(1, 1, 100, 7);
    f.target.setZero();
    f.q.setZero();
    f.qd.setZero();
    f.qdd.setZero();
    f.r.setZero();
    WindowSplit split;
    split.train = window_ends(f, 1);
    TrainConfig c;
    c.epochs = 8;
    c.batch = 100;
    c.runs = 1;
    c.weight_decay = 0.0;
    const TrainedHybrid m = train(mlp_spec(1, false, false), toy_rbd(1), f, split, c);
    EXPECT_DOUBLE_EQ(m.history[0].lr, 1e-3);
    EXPECT_DOUBLE_EQ(m.history[3].lr, 1e-3);
    EXPECT_DOUBLE_EQ(m.history[4].lr, 5e-4);
}

TEST(Training, ContractViolations) {
    const FeatureTable f = toy_table(1, 1, 30, 8);
    WindowSplit split;
    split.train = window_ends(f, 1);
    TrainConfig c;
    c.batch = 50;
    EXPECT_THROW(train(mlp_spec(1, false, false), toy_rbd(1), f, split, c), ContractError);
    c.batch = 10;
    c.epochs = 0;
    EXPECT_THROW(train(mlp_spec(1, false, false), toy_rbd(1), f, split, c), ContractError);
    c.epochs = 1;
    split.train = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    EXPECT_THROW(train(lstm_spec(1, 5, false, false), toy_rbd(1), f, split, c), ContractError);
}

TEST(Training, NonFiniteTargetsRaiseTrainingFault) {
    FeatureTable f = toy_table(1, 1, 40, 9);
    f.target(0, 5) = std::numeric_limits<double>::infinity();
    WindowSplit split;
    split.train = window_ends(f, 1);
    TrainConfig c;
    c.batch = 40;
    c.epochs = 1;
    c.runs = 1;
    c.normalize_outputs = false;
    EXPECT_THROW(train(mlp_spec(1, false, false), toy_rbd(1), f, split, c), TrainingFault);
}

TEST(Hybrid, ZeroNetworkGivesRbd) {
    FeatureTable f = toy_table(2, 1, 50, 10);
    f.tau_rbd = Eigen::MatrixXd::Random(2, 50);
    WindowSplit split;
    split.train = window_ends(f, 3);
    TrainConfig c;
    c.epochs = 1;
    c.batch = 10;
    c.runs = 1;
    TrainedHybrid m = train(lstm_spec(2, 3, true, true), toy_rbd(2), f, split, c);
    constant_output(m, 0.0);
    m.network.output_norm = nn::Normalizer::identity(2);
    EXPECT_EQ(predict_windows(m, f, split.train), gather_columns(f.tau_rbd, split.train, 0, split.train.size()));
}

TEST(Hybrid, AdditivityForConstantNetworkOutput) {
    FeatureTable f = toy_table(2, 1, 50, 11);
    f.tau_rbd = 3.0 * Eigen::MatrixXd::Random(2, 50);
    WindowSplit split;
    split.train = window_ends(f, 1);
    TrainConfig c;
    c.epochs = 1;
    c.batch = 10;
    c.runs = 1;
    TrainedHybrid m = train(mlp_spec(2, true, true), toy_rbd(2), f, split, c);
    constant_output(m, 0.25);
    const Eigen::VectorXd constant = m.network.output_norm.denormalize(Eigen::VectorXd::Constant(2, 0.25));
    const Eigen::MatrixXd diff = predict_windows(m, f, split.train) - gather_columns(f.tau_rbd, split.train, 0, split.train.size());
    for (Eigen::Index k = 0; k < diff.cols(); ++k) {
        EXPECT_LT((diff.col(k) - constant).cwiseAbs().maxCoeff(), 1e-12);
    }

    TrainedHybrid standalone = train(mlp_spec(2, false, true), toy_rbd(2), f, split, c);
    constant_output(standalone, 0.25);
    const Eigen::VectorXd nn_only = standalone.network.output_norm.denormalize(Eigen::VectorXd::Constant(2, 0.25));
    const Eigen::MatrixXd y = predict_windows(standalone, f, split.train);
    for (Eigen::Index k = 0; k < y.cols(); ++k) EXPECT_EQ(y.col(k), nn_only);
}

TEST(Hybrid, StreamingMatchesTableOnSegmentStart) {
    const RobotChain chain = reference_chain();
    const PlantModel plant = PlantModel::with_defaults(chain, reference_parameters());
    LimopaConfig lc;
    lc.scaffolds = 2;
    lc.exploration.length_min = 60;
    lc.exploration.length_max = 80;
    const Dataset d = generate_dataset(plant, generate_limo_path(chain, lc, 5), 100.0, 1, 5);
    IdentifiedRbdModel rbd;
    rbd.chain = chain;
    rbd.base = structural_base(chain);
    rbd.phi_b = rbd.base.map * reference_parameters();
    const FeatureTable f = build_feature_table(d, rbd);
    const WindowSplit split = split_windows(window_ends(f, 4), 0.8, 0.0, 1);
    TrainConfig c;
    c.epochs = 1;
    c.runs = 1;
    nn::NetworkSpec spec = lstm_spec(7, 4, true, true);
    const TrainedHybrid m = train(spec, rbd, f, split, c);
    HybridPredictor p(m);
    EXPECT_FALSE(p.ready());
    EXPECT_THROW(p.predict(), ContractError);
    const std::vector<int> ends{3, 4, 50, 200};
    const Eigen::MatrixXd batch = predict_windows(m, f, ends);
    std::size_t next = 0;
    for (int k = 0; k <= ends.back(); ++k) {
        p.push(JointState{f.q.col(k), f.qd.col(k), f.qdd.col(k)});
        if (k == ends[next]) {
            EXPECT_LT((p.predict() - batch.col(static_cast<Eigen::Index>(next))).cwiseAbs().maxCoeff(), 1e-9) << k;
            ++next;
        }
    }
    EXPECT_THROW(hybrid_predict(m, f.q.leftCols(3), f.qd.leftCols(3), f.qdd.leftCols(3)), ContractError);
    const Eigen::VectorXd first = hybrid_predict(m, f.q.leftCols(4), f.qd.leftCols(4), f.qdd.leftCols(4));
    EXPECT_LT((first - batch.col(0)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Hybrid, CheckpointRoundTrip) {
    const FeatureTable f = toy_table(2, 2, 40, 12);
    const WindowSplit split = split_windows(window_ends(f, 5), 0.8, 0.1, 1);
    TrainConfig c;
    c.epochs = 2;
    c.batch = 8;
    c.runs = 1;
    const TrainedHybrid m = train(lstm_spec(2, 5, true, true), toy_rbd(2), f, split, c);
    const auto path = std::filesystem::temp_directory_path() / "lidym_hybrid_roundtrip.txt";
    save_hybrid(path.string(), m);
    const TrainedHybrid back = load_hybrid(path.string());
    std::filesystem::remove(path);
    EXPECT_EQ(predict_windows(back, f, split.test), predict_windows(m, f, split.test));
    EXPECT_EQ(back.spec().label(), m.spec().label());
    EXPECT_EQ(back.best_val_mse, m.best_val_mse);
    EXPECT_THROW(load_hybrid("/nonexistent/model.txt"), IoError);
}

TEST(Hybrid, TrainingLogFormat) {
    std::vector<EpochRecord> h{{0, 1, 0.5, 0.25, 1e-3}, {1, 1, 0.4, 0.2, 1e-3}};
    EXPECT_EQ(training_log_csv(h, 0), "epoch,train_mse,val_mse,lr\n1,0.5,0.25,0.001\n");
    const std::string all = training_log_csv(h);
    EXPECT_EQ(std::count(all.begin(), all.end(), '\n'), 3);
}

TEST(Hybrid, MlpHybridBeatsRbdOnSyntheticData) {
    ExperimentConfig cfg;
    cfg.limopa.scaffolds = 3;
    cfg.excitation_budget = 60;
    const ExperimentData e = prepare_experiment(cfg, reference_chain(), reference_parameters(), 3);
    const FeatureTable f = build_feature_table(e.training, e.rbd);
    ASSERT_GT(f.size(), 8000);
    const WindowSplit split = split_windows(window_ends(f, 1), 0.8, 0.1, 4);
    TrainConfig c;
    c.epochs = 30;
    c.runs = 1;
    const TrainedHybrid m = train(mlp_spec(7, true, true), e.rbd, f, split, c);
    const Eigen::MatrixXd target = gather_columns(f.target, split.test, 0, split.test.size());
    const double hybrid = (predict_windows(m, f, split.test) - target).squaredNorm() / static_cast<double>(target.size());
    const double rbd =
        (gather_columns(f.tau_rbd, split.test, 0, split.test.size()) - target).squaredNorm() / static_cast<double>(target.size());
    EXPECT_LT(hybrid, rbd);
    std::cout << "MLP-7 hybrid test MSE " << hybrid << " vs RBD " << rbd << "\n";
}
