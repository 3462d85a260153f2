#include <cmath>
#include <filesystem>
#include <numbers>

#include <gtest/gtest.h>

#include "lidym/identification.hpp"
#include "test_support.hpp"

using namespace lidym;

namespace {

StackedSystem simulate(const RobotChain& chain, const Eigen::VectorXd& phi, const std::vector<JointState>& states,
                       double noise = 0.0, std::uint64_t seed = 0) {
    Rng rng(seed);
    StackedSystem sys;
    sys.k = stack_regressor(chain, states);
    sys.tau.resize(sys.k.rows());
    const int n = chain.size();
    for (std::size_t i = 0; i < states.size(); ++i) {
        Eigen::VectorXd tau = rnea(chain, phi, states[i]);
        for (int j = 0; j < n; ++j) tau(j) += rng.normal(0.0, noise);
        sys.tau.segment(static_cast<Eigen::Index>(i) * n, n) = tau;
    }
    return sys;
}

std::vector<JointState> excitation_states(const RobotChain& chain, int count, std::uint64_t seed) {
    return synth_excitation(chain, ExcitationSpec{}, seed).sample(count);
}

double mse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).squaredNorm() / a.size(); }

}  // namespace

TEST(Excitation, PeriodicOverOneDuration) {
    const auto traj = synth_excitation(reference_chain(), ExcitationSpec{}, 3);
    const JointState a = traj.state(0.0);
    const JointState b = traj.state(10.0);
    EXPECT_LT((a.q - b.q).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((a.qd - b.qd).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Excitation, OversizedAmplitudeIsScaledOntoTheMargin) {
    Joint j;
    j.lower = -0.5;
    j.upper = 0.5;
    j.velocity_limit = 100.0;
    const RobotChain chain({j});
    ExcitationSpec spec;
    spec.harmonics = 1;
    spec.amplitude = 10.0;
    spec.margin = 0.05;
    const auto traj = synth_excitation(chain, spec, 11);
    double peak = 0.0;
    for (int i = 0; i <= 100000; ++i) peak = std::max(peak, std::abs(traj.state(traj.duration * i / 100000).q(0)));
    EXPECT_NEAR(peak, 0.45, 1e-9);
}

TEST(Excitation, SameSeedGivesIdenticalCoefficients) {
    const auto a = synth_excitation(reference_chain(), ExcitationSpec{}, 42);
    const auto b = synth_excitation(reference_chain(), ExcitationSpec{}, 42);
    EXPECT_EQ(a.offset, b.offset);
    EXPECT_EQ(a.amplitude, b.amplitude);
    EXPECT_EQ(a.phase, b.phase);
    const auto c = synth_excitation(reference_chain(), ExcitationSpec{}, 43);
    EXPECT_NE(a.phase, c.phase);
}

TEST(Excitation, SynthesizedTrajectoriesRespectLimitsOnDenseGrid) {
    const RobotChain chain = reference_chain();
    ExcitationSpec spec;
    spec.amplitude = 1.0;  // forces rescaling on every joint
    spec.offset_spread = 0.6;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto [pos, vel] = limit_violation(chain, synth_excitation(chain, spec, seed), 20000);
        EXPECT_LE(pos, 1e-6);
        EXPECT_LE(vel, 1e-6);
    }
}

TEST(Excitation, InfeasibleLimitsAreReported) {
    Joint j;
    j.lower = -0.01;
    j.upper = 0.01;
    ExcitationSpec spec;
    spec.margin = 0.05;
    EXPECT_THROW(synth_excitation(RobotChain({j}), spec, 1), InfeasibleError);
}

TEST(OptimizeExcitation, BudgetOneReturnsTheSeedTrajectory) {
    const RobotChain chain = reference_chain();
    const ExcitationSpec spec;
    const auto result = optimize_excitation(chain, spec, 1, 9);
    const auto seed_traj = synth_excitation(chain, spec, 9);
    EXPECT_EQ(result.trajectory.amplitude, seed_traj.amplitude);
    EXPECT_EQ(result.cond, result.seed_cond);
    EXPECT_EQ(result.evaluations, 1);
    EXPECT_THROW(optimize_excitation(chain, spec, 0, 9), ContractError);
}

TEST(OptimizeExcitation, NeverWorseThanSeedAndAlwaysFeasible) {
    const RobotChain chain = reference_chain();
    const ExcitationSpec spec;
    const auto result = optimize_excitation(chain, spec, 80, 21);
    EXPECT_LE(result.cond, result.seed_cond);
    EXPECT_EQ(result.evaluations, 80);
    const auto [pos, vel] = limit_violation(chain, result.trajectory, 20000);
    EXPECT_LE(pos, 1e-6);
    EXPECT_LE(vel, 1e-6);
    const auto again = optimize_excitation(chain, spec, 80, 21);
    EXPECT_EQ(again.cond, result.cond);
}

TEST(StackRegressor, SingleStateEqualsRegressor) {
    Rng rng(31);
    const RobotChain chain = reference_chain();
    const JointState s = test::random_state(chain, rng);
    EXPECT_EQ(stack_regressor(chain, std::vector<JointState>{s}), regressor(chain, s));
}

TEST(StackRegressor, ShapeAndTorqueEquivalence) {
    const RobotChain chain = reference_chain();
    const auto states = excitation_states(chain, 40, 2);
    const auto sys = simulate(chain, reference_parameters(), states);
    EXPECT_EQ(sys.k.rows(), 40 * 7);
    EXPECT_EQ(sys.k.cols(), 84);
    EXPECT_LT(test::relative_error(sys.k * reference_parameters(), sys.tau), 1e-9);
}

TEST(StackRegressor, ObservationSetUsesFilteredTorques) {
    ObservationSet obs;
    obs.t = Eigen::VectorXd::LinSpaced(3, 0.0, 0.02);
    obs.q = Eigen::MatrixXd::Zero(7, 3);
    obs.qd = Eigen::MatrixXd::Zero(7, 3);
    obs.qdd = Eigen::MatrixXd::Zero(7, 3);
    obs.tau = Eigen::MatrixXd::Random(7, 3);
    obs.tau_raw = Eigen::MatrixXd::Zero(7, 3);
    const auto sys = stack_regressor(reference_chain(), obs);
    EXPECT_EQ(sys.tau(8), obs.tau(1, 1));
}

TEST(BaseReduction, FullRankIsIdentity) {
    Rng rng(41);
    Eigen::MatrixXd k(30, 6);
    for (Eigen::Index i = 0; i < k.size(); ++i) k.data()[i] = rng.normal(0, 1);
    const auto base = base_reduction(k);
    EXPECT_EQ(base.rank(), 6);
    EXPECT_EQ(base.map, Eigen::MatrixXd::Identity(6, 6));
}

TEST(BaseReduction, DuplicatedColumnDropsRankByOne) {
    Rng rng(42);
    Eigen::MatrixXd k(40, 8);
    for (Eigen::Index i = 0; i < k.size(); ++i) k.data()[i] = rng.normal(0, 1);
    Eigen::MatrixXd dup(40, 9);
    dup << k, k.col(3);
    EXPECT_EQ(base_reduction(dup).rank(), 8);
    EXPECT_EQ(dup.cols() - base_reduction(dup).rank(), 1);
}

TEST(BaseReduction, ZeroMatrixHasRankZero) {
    const auto base = base_reduction(Eigen::MatrixXd::Zero(10, 4));
    EXPECT_EQ(base.rank(), 0);
    EXPECT_EQ(base.map.rows(), 0);
    EXPECT_EQ(base.map.cols(), 4);
}

TEST(BaseReduction, ReconstructsRegressorTorques) {
    const RobotChain chain = reference_chain();
    const Eigen::MatrixXd k = stack_regressor(chain, excitation_states(chain, 500, 4));
    const auto base = base_reduction(k);
    const Eigen::MatrixXd kb = base.select(k);
    Rng rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd phi(84);
        for (auto& v : phi) v = rng.normal(0, 1);
        EXPECT_LT((k * phi - kb * base.apply(phi)).norm(), 1e-9 * (k * phi).norm());
    }
}

TEST(BaseReduction, ReferenceChainRankIsStable) {
    // Regression value for the reference chain on 500 excitation states.
    const RobotChain chain = reference_chain();
    const auto base = base_reduction(stack_regressor(chain, excitation_states(chain, 500, 4)));
    EXPECT_EQ(base.rank(), 57);
    EXPECT_EQ(structural_base(chain).rank(), 57);
}

TEST(Identify, ZeroTargetGivesZeroParameters) {
    Rng rng(51);
    Eigen::MatrixXd k(20, 5);
    for (Eigen::Index i = 0; i < k.size(); ++i) k.data()[i] = rng.normal(0, 1);
    EXPECT_EQ(identify(k, Eigen::VectorXd::Zero(20)), Eigen::VectorXd::Zero(5));
}

TEST(Identify, RejectsUnderdeterminedAndRankDeficientSystems) {
    EXPECT_THROW(identify(Eigen::MatrixXd::Ones(3, 5), Eigen::VectorXd::Zero(3)), ContractError);
    Eigen::MatrixXd k = Eigen::MatrixXd::Random(20, 3);
    k.col(2) = k.col(0);
    EXPECT_THROW(identify(k, Eigen::VectorXd::Zero(20)), ContractError);
}

TEST(Identify, NoiselessDataIsReproduced) {
    const RobotChain chain = reference_chain();
    const auto sys = simulate(chain, reference_parameters(), excitation_states(chain, 500, 6));
    const auto model = identify_rbd(chain, sys);
    EXPECT_LT(model.residual_mse.maxCoeff(), 1e-8);
    EXPECT_TRUE(std::isfinite(model.condition));

    // Unseen states from another trajectory.
    const auto held_out = excitation_states(chain, 200, 7);
    double worst = 0.0;
    for (const auto& s : held_out) {
        worst = std::max(worst, mse(predict_rbd(model, s), rnea(chain, reference_parameters(), s)));
    }
    EXPECT_LT(worst, 1e-8);
    EXPECT_LT((predict_rbd(model, excitation_states(chain, 500, 6)[17]) -
               rnea(chain, reference_parameters(), excitation_states(chain, 500, 6)[17]))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-4);
}

TEST(Identify, LeastSquaresOptimality) {
    const RobotChain chain = reference_chain();
    const auto sys = simulate(chain, reference_parameters(), excitation_states(chain, 300, 8), 0.05, 3);
    const auto base = base_reduction(sys.k);
    const Eigen::MatrixXd kb = base.select(sys.k);
    const Eigen::VectorXd phi_b = identify(kb, sys.tau);
    const double best = (kb * phi_b - sys.tau).squaredNorm();
    Rng rng(52);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd delta(phi_b.size());
        for (auto& v : delta) v = rng.normal(0, 1);
        delta *= 1e-3 / delta.norm();
        EXPECT_GE((kb * (phi_b + delta) - sys.tau).squaredNorm(), best);
    }
}

TEST(Identify, HeldOutErrorMatchesNoiseFloor) {
    const RobotChain chain = reference_chain();
    const double sigma = 0.05;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto train = simulate(chain, reference_parameters(), excitation_states(chain, 500, 100 + seed), sigma,
                                    200 + seed);
        const auto model = identify_rbd(chain, train);
        const auto test_states = excitation_states(chain, 200, 300 + seed);
        const auto test = simulate(chain, reference_parameters(), test_states, sigma, 400 + seed);
        Eigen::VectorXd pred(test.tau.size());
        for (std::size_t i = 0; i < test_states.size(); ++i) {
            pred.segment(static_cast<Eigen::Index>(i) * 7, 7) = predict_rbd(model, test_states[i]);
        }
        const double ratio = mse(pred, test.tau) / (sigma * sigma);
        EXPECT_GE(ratio, 0.5);
        EXPECT_LE(ratio, 2.0);
    }
}

TEST(PredictRbd, ZeroMotionWithoutGravityIsZero) {
    const RobotChain chain = reference_chain();
    const auto model = identify_rbd(chain, simulate(chain, reference_parameters(), excitation_states(chain, 300, 9)));
    const RobotChain free(chain.joints(), Eigen::Vector3d::Zero(), chain.tool_offset());
    IdentifiedRbdModel weightless = model;
    weightless.chain = free;
    JointState s = JointState::zeros(7);
    s.q = excitation_states(chain, 3, 1)[1].q;
    EXPECT_EQ(predict_rbd(weightless, s), Eigen::VectorXd::Zero(7));
}

TEST(PredictRbd, FilteredSampledTrajectoryIdentifiesWell) {
    const RobotChain chain = reference_chain();
    const auto traj = synth_excitation(chain, ExcitationSpec{}, 12);
    // Coulomb steps are smeared by the low-pass filter, so this fidelity check uses smooth friction only.
    Eigen::VectorXd phi = reference_parameters();
    for (int link = 0; link < 7; ++link) phi(kParamsPerLink * link + kCoulomb) = 0.0;
    const int n = 1000;
    Eigen::VectorXd t(n);
    Eigen::MatrixXd q(7, n), tau(7, n);
    for (int i = 0; i < n; ++i) {
        t(i) = i / 100.0;
        const JointState s = traj.state(t(i));
        q.col(i) = s.q;
        tau.col(i) = rnea(chain, phi, s);
    }
    const auto obs = preprocess(t, q, tau, 100.0);
    const auto model = identify_rbd(chain, obs);
    // Analytic states between the samples of the same motion.
    double worst = 0.0;
    for (int i = 100; i < 900; i += 7) {
        const JointState s = traj.state((i + 0.5) / 100.0);
        worst = std::max(worst, mse(predict_rbd(model, s), rnea(chain, phi, s)));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(RbdModelFile, RoundTripIsExact) {
    const RobotChain chain = reference_chain();
    const auto model = identify_rbd(chain, simulate(chain, reference_parameters(), excitation_states(chain, 300, 14)));
    const auto path = std::filesystem::temp_directory_path() / "lidym_test_rbd.txt";
    save_rbd_model(path.string(), model);
    const auto loaded = load_rbd_model(path.string());
    EXPECT_EQ(loaded.base.columns, model.base.columns);
    EXPECT_EQ(loaded.base.map, model.base.map);
    EXPECT_EQ(loaded.phi_b, model.phi_b);
    const JointState s = excitation_states(chain, 5, 15)[3];
    EXPECT_LT((predict_rbd(loaded, s) - predict_rbd(model, s)).norm(), 1e-12);
    std::filesystem::remove(path);
}
