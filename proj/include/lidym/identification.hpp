#pragma once

/**
 * @file identification.hpp
 * @brief Parametric rigid-body identification: Fourier excitation
 *        trajectories and their condition-number optimization, stacked
 *        regressors, QR base-parameter reduction, ordinary least squares and
 *        the resulting rigid-body torque predictor.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lidym/chain.hpp"
#include "lidym/dynamics.hpp"
#include "lidym/errors.hpp"
#include "lidym/filter.hpp"
#include "lidym/parallel.hpp"
#include "lidym/random.hpp"
#include "lidym/text_format.hpp"

namespace lidym {

// ---------------------------------------------------------------------------
// Fourier excitation trajectories

/// q_j(t) = offset_j + sum_k A_jk sin(2 pi f_k t + phi_jk) with f_k = (k + 1) * base_frequency.
struct FourierTrajectory {
    Eigen::VectorXd offset;     ///< [rad]
    Eigen::MatrixXd amplitude;  ///< joints x harmonics [rad]
    Eigen::MatrixXd phase;      ///< joints x harmonics [rad]
    double base_frequency = 0.1;  ///< [Hz]
    double duration = 10.0;       ///< [s]

    int joints() const { return static_cast<int>(offset.size()); }
    int harmonics() const { return static_cast<int>(amplitude.cols()); }
    double frequency(int k) const { return (k + 1) * base_frequency; }

    /// d^order/dt^order of the oscillating part of joint j (offset excluded).
    double oscillation(int j, double t, int order) const {
        double sum = 0.0;
        for (int k = 0; k < harmonics(); ++k) {
            const double w = 2.0 * std::numbers::pi * frequency(k);
            sum += amplitude(j, k) * std::pow(w, order) *
                   std::sin(w * t + phase(j, k) + 0.5 * std::numbers::pi * order);
        }
        return sum;
    }

    JointState state(double t) const {
        JointState s = JointState::zeros(joints());
        for (int j = 0; j < joints(); ++j) {
            s.q(j) = offset(j) + oscillation(j, t, 0);
            s.qd(j) = oscillation(j, t, 1);
            s.qdd(j) = oscillation(j, t, 2);
        }
        return s;
    }

    /// `count` states at t_i = i * duration / count.
    std::vector<JointState> sample(int count) const {
        std::vector<JointState> out;
        out.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            out.push_back(state(duration * i / count));
        }
        return out;
    }
};

struct ExcitationSpec {
    int harmonics = 5;
    double base_frequency = 0.1;      ///< [Hz]
    double duration = 10.0;           ///< [s]
    double amplitude = 0.2;           ///< upper bound of the requested per-harmonic amplitude [rad]
    double margin = 0.05;             ///< clearance kept to the position limits [rad]
    double velocity_fraction = 0.95;  ///< allowed fraction of each velocity limit
    double offset_spread = 0.0;       ///< random offsets within this fraction of the half range
    int grid = 2000;                  ///< dense samples used for limit checks
    int cond_states = 200;            ///< states stacked when evaluating cond
};

namespace detail {

/// Largest value of sign * d^order q_j / dt^order over [0, duration]: dense
/// grid followed by Newton refinement of the leading local maxima.
inline double fourier_peak(const FourierTrajectory& traj, int j, int order, double sign, int grid) {
    const double dt = traj.duration / grid;
    std::vector<double> values(static_cast<std::size_t>(grid) + 1);
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= grid; ++i) {
        values[static_cast<std::size_t>(i)] = sign * traj.oscillation(j, dt * i, order);
        best = std::max(best, values[static_cast<std::size_t>(i)]);
    }
    const double slack = 1e-2 * std::abs(best) + 1e-12;
    for (int i = 1; i < grid; ++i) {
        const double v = values[static_cast<std::size_t>(i)];
        if (v < best - slack || v < values[static_cast<std::size_t>(i) - 1] ||
            v < values[static_cast<std::size_t>(i) + 1]) {
            continue;
        }
        double t = dt * i;
        for (int iter = 0; iter < 12; ++iter) {
            const double d1 = sign * traj.oscillation(j, t, order + 1);
            const double d2 = sign * traj.oscillation(j, t, order + 2);
            if (!(d2 < 0.0)) {
                break;
            }
            t = std::clamp(t - d1 / d2, dt * (i - 1), dt * (i + 1));
        }
        best = std::max(best, sign * traj.oscillation(j, t, order));
    }
    return best;
}

}  // namespace detail

/// Largest position overshoot and velocity-limit excess over a dense grid (0 when feasible).
inline std::pair<double, double> limit_violation(const RobotChain& chain, const FourierTrajectory& traj, int grid) {
    double position = 0.0;
    double velocity = 0.0;
    for (int i = 0; i <= grid; ++i) {
        const JointState s = traj.state(traj.duration * i / grid);
        for (int j = 0; j < chain.size(); ++j) {
            position = std::max({position, s.q(j) - chain.joint(j).upper, chain.joint(j).lower - s.q(j)});
            velocity = std::max(velocity, std::abs(s.qd(j)) - chain.joint(j).velocity_limit);
        }
    }
    return {position, velocity};
}

/**
 * Scales each joint's amplitudes down (never up) so that q stays within the
 * limits shrunk by spec.margin and |qd| within velocity_fraction of its limit.
 */
inline FourierTrajectory fit_to_limits(FourierTrajectory traj, const RobotChain& chain, const ExcitationSpec& spec) {
    if (traj.joints() != chain.size()) {
        throw ContractError("excitation trajectory does not match the chain");
    }
    for (int j = 0; j < chain.size(); ++j) {
        const double lo = chain.joint(j).lower + spec.margin;
        const double hi = chain.joint(j).upper - spec.margin;
        const double off = traj.offset(j);
        if (!(off > lo && off < hi)) {
            throw InfeasibleError("joint " + std::to_string(j + 1) +
                                  ": limits minus margin leave no room for a nonzero amplitude");
        }
        if (traj.amplitude.row(j).cwiseAbs().maxCoeff() == 0.0) {
            continue;
        }
        const double up = detail::fourier_peak(traj, j, 0, 1.0, spec.grid);
        const double down = detail::fourier_peak(traj, j, 0, -1.0, spec.grid);
        const double speed = std::max(detail::fourier_peak(traj, j, 1, 1.0, spec.grid),
                                      detail::fourier_peak(traj, j, 1, -1.0, spec.grid));
        double scale = 1.0;
        if (up > 0.0) scale = std::min(scale, (hi - off) / up);
        if (down > 0.0) scale = std::min(scale, (off - lo) / down);
        if (speed > 0.0) scale = std::min(scale, spec.velocity_fraction * chain.joint(j).velocity_limit / speed);
        traj.amplitude.row(j) *= scale;
    }
    return traj;
}

/// Random Fourier coefficients fitted into the joint limits.
inline FourierTrajectory synth_excitation(const RobotChain& chain, const ExcitationSpec& spec, std::uint64_t seed) {
    if (spec.harmonics < 1 || !(spec.base_frequency > 0.0) || !(spec.duration > 0.0) || spec.grid < 10) {
        throw ContractError("invalid excitation spec");
    }
    Rng rng(seed);
    const int n = chain.size();
    FourierTrajectory traj;
    traj.base_frequency = spec.base_frequency;
    traj.duration = spec.duration;
    traj.offset.resize(n);
    traj.amplitude.resize(n, spec.harmonics);
    traj.phase.resize(n, spec.harmonics);
    for (int j = 0; j < n; ++j) {
        const double center = 0.5 * (chain.joint(j).lower + chain.joint(j).upper);
        const double half = 0.5 * (chain.joint(j).upper - chain.joint(j).lower);
        traj.offset(j) = center + spec.offset_spread * half * rng.uniform(-1.0, 1.0);
        for (int k = 0; k < spec.harmonics; ++k) {
            traj.amplitude(j, k) = spec.amplitude * rng.uniform(0.0, 1.0);
            traj.phase(j, k) = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
    }
    return fit_to_limits(std::move(traj), chain, spec);
}

// ---------------------------------------------------------------------------
// Stacked regressor, base reduction, least squares

/// Rows k*n .. k*n+n-1 hold the regressor of state k.
inline Eigen::MatrixXd stack_regressor(const RobotChain& chain, const std::vector<JointState>& states) {
    const int n = chain.size();
    Eigen::MatrixXd k(static_cast<Eigen::Index>(states.size()) * n, kParamsPerLink * n);
    for (std::size_t i = 0; i < states.size(); ++i) {
        k.middleRows(static_cast<Eigen::Index>(i) * n, n) = regressor(chain, states[i]);
    }
    return k;
}

struct StackedSystem {
    Eigen::MatrixXd k;    ///< (N n) x 12n
    Eigen::VectorXd tau;  ///< N n
};

/// Stacked regressor of an observation set against its filtered torques.
inline StackedSystem stack_regressor(const RobotChain& chain, const ObservationSet& obs) {
    if (obs.joints() != chain.size()) {
        throw ContractError("observation set does not match the chain");
    }
    if (obs.size() < 1) {
        throw ContractError("stack_regressor needs at least one observation");
    }
    std::vector<JointState> states;
    states.reserve(static_cast<std::size_t>(obs.size()));
    for (int i = 0; i < obs.size(); ++i) {
        states.push_back(obs.state(i));
    }
    StackedSystem out;
    out.k = stack_regressor(chain, states);
    out.tau = Eigen::Map<const Eigen::VectorXd>(obs.tau.data(), obs.tau.size());
    return out;
}

/// Selected independent regressor columns and the map from full to base parameters.
struct BaseParameterMap {
    std::vector<int> columns;  ///< ascending indices into the full columns
    Eigen::MatrixXd map;       ///< rank x full_columns
    int full_columns = 0;

    int rank() const { return static_cast<int>(columns.size()); }

    Eigen::VectorXd apply(const Eigen::VectorXd& phi) const { return map * phi; }

    Eigen::MatrixXd select(const Eigen::MatrixXd& k) const {
        Eigen::MatrixXd out(k.rows(), rank());
        for (int c = 0; c < rank(); ++c) {
            out.col(c) = k.col(columns[static_cast<std::size_t>(c)]);
        }
        return out;
    }
};

/**
 * Numerical rank by column-pivoted QR (|R_ii| > rank_tol * |R_00|). The
 * dependent columns satisfy K_dep = K_base * R11^-1 R12, which folds them
 * into the base parameters: K Phi = K_base * map * Phi.
 */
inline BaseParameterMap base_reduction(const Eigen::MatrixXd& k, double rank_tol = 1e-8) {
    if (k.size() == 0) {
        throw ContractError("base_reduction needs a nonempty matrix");
    }
    const int cols = static_cast<int>(k.cols());
    BaseParameterMap out;
    out.full_columns = cols;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(k);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    const auto& perm = qr.colsPermutation().indices();
    const int diag = static_cast<int>(std::min(k.rows(), k.cols()));
    const double lead = diag > 0 ? std::abs(r(0, 0)) : 0.0;
    int rank = 0;
    while (rank < diag && lead > 0.0 && std::abs(r(rank, rank)) > rank_tol * lead) {
        ++rank;
    }
    if (rank == 0) {
        out.map.resize(0, cols);
        return out;
    }
    const Eigen::MatrixXd beta = r.topLeftCorner(rank, rank).triangularView<Eigen::Upper>().solve(
        r.block(0, rank, rank, cols - rank));

    std::vector<int> order(static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return perm(a) < perm(b); });

    out.map = Eigen::MatrixXd::Zero(rank, cols);
    for (int row = 0; row < rank; ++row) {
        const int p = order[static_cast<std::size_t>(row)];
        out.columns.push_back(perm(p));
        out.map(row, perm(p)) = 1.0;
        for (int d = 0; d < cols - rank; ++d) {
            out.map(row, perm(rank + d)) = beta(p, d);
        }
    }
    return out;
}

/// 2-norm condition number; infinite for rank-deficient or empty matrices.
inline double condition_number(const Eigen::MatrixXd& m) {
    if (m.size() == 0 || m.rows() < m.cols()) {
        return std::numeric_limits<double>::infinity();
    }
    const Eigen::MatrixXd r = Eigen::HouseholderQR<Eigen::MatrixXd>(m).matrixQR().topRows(m.cols())
                                  .triangularView<Eigen::Upper>();
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
    const double smallest = sv(sv.size() - 1);
    return smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
}

/// Ordinary least squares for the base parameters.
inline Eigen::VectorXd identify(const Eigen::MatrixXd& k_base, const Eigen::VectorXd& tau) {
    if (k_base.rows() != tau.size()) {
        throw ContractError("identify: regressor rows and torque entries differ");
    }
    if (k_base.cols() == 0 || k_base.rows() < k_base.cols()) {
        throw ContractError("identify needs at least as many rows as base parameters");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(k_base);
    if (qr.rank() < k_base.cols()) {
        throw ContractError("identify: regressor is rank deficient; apply base_reduction first");
    }
    return qr.solve(tau);
}

/// Random states spanning the limits, used to find the structural base columns.
inline std::vector<JointState> random_states(const RobotChain& chain, int count, std::uint64_t seed,
                                             double max_acceleration = 5.0) {
    Rng rng(seed);
    std::vector<JointState> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        JointState s = JointState::zeros(chain.size());
        for (int j = 0; j < chain.size(); ++j) {
            s.q(j) = rng.uniform(chain.joint(j).lower, chain.joint(j).upper);
            s.qd(j) = rng.uniform(-chain.joint(j).velocity_limit, chain.joint(j).velocity_limit);
            s.qdd(j) = rng.uniform(-max_acceleration, max_acceleration);
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Base columns of the chain's regressor, independent of any particular trajectory.
inline BaseParameterMap structural_base(const RobotChain& chain, std::uint64_t seed = 0, double rank_tol = 1e-8) {
    return base_reduction(stack_regressor(chain, random_states(chain, 300, seed)), rank_tol);
}

/// cond(K_b) over spec.cond_states samples of one trajectory period.
inline double excitation_condition(const RobotChain& chain, const FourierTrajectory& traj,
                                   const BaseParameterMap& base, int states) {
    return condition_number(base.select(stack_regressor(chain, traj.sample(states))));
}

struct ExcitationResult {
    FourierTrajectory trajectory;
    double cond = std::numeric_limits<double>::infinity();
    double seed_cond = std::numeric_limits<double>::infinity();
    int evaluations = 0;
};

/**
 * Multi-start random search over Fourier coefficients followed by
 * coordinate descent on amplitudes, phases and offsets. Candidate 0 is
 * synth_excitation(chain, spec, seed); the result is never worse than it.
 */
inline ExcitationResult optimize_excitation(const RobotChain& chain, const ExcitationSpec& spec, int budget,
                                            std::uint64_t seed) {
    if (budget < 1) {
        throw ContractError("optimize_excitation needs a budget of at least one evaluation");
    }
    const int states = std::max(200, spec.cond_states);
    const BaseParameterMap base = structural_base(chain, mix_seed(seed, 0xBA5E));
    auto evaluate = [&](const FourierTrajectory& t) { return excitation_condition(chain, t, base, states); };

    // Multi-start phase: candidate 0 is the seed trajectory.
    const int starts = budget == 1 ? 1 : std::max(1, budget / 4);
    std::vector<FourierTrajectory> candidates(static_cast<std::size_t>(starts));
    std::vector<double> conds(static_cast<std::size_t>(starts), std::numeric_limits<double>::infinity());
    parallel_for(static_cast<std::size_t>(starts), [&](std::size_t i) {
        try {
            candidates[i] = synth_excitation(chain, spec, i == 0 ? seed : mix_seed(seed, 1, i));
            conds[i] = evaluate(candidates[i]);
        } catch (const InfeasibleError&) {
            if (i == 0) throw;
        }
    });
    std::size_t best_index = 0;
    for (std::size_t i = 1; i < conds.size(); ++i) {
        if (conds[i] < conds[best_index]) best_index = i;
    }
    ExcitationResult result;
    result.seed_cond = conds[0];
    result.trajectory = candidates[best_index];
    result.cond = conds[best_index];
    result.evaluations = starts;
    if (!std::isfinite(result.cond) && budget == 1) {
        throw InfeasibleError("seed excitation trajectory is rank deficient on the base columns");
    }

    // Coordinate descent: +/- steps per coefficient, step halves after an unproductive sweep.
    const int n = chain.size();
    const int h = spec.harmonics;
    double amp_step = 0.5;
    double phase_step = 0.8;
    double offset_step = 0.1;
    Rng rng(mix_seed(seed, 2));
    while (result.evaluations < budget) {
        bool improved = false;
        for (int coord = 0; coord < n * (2 * h + 1) && result.evaluations < budget; ++coord) {
            const int j = coord / (2 * h + 1);
            const int slot = coord % (2 * h + 1);
            for (double direction : {1.0, -1.0}) {
                if (result.evaluations >= budget) break;
                FourierTrajectory trial = result.trajectory;
                if (slot < h) {
                    const double a = trial.amplitude(j, slot);
                    trial.amplitude(j, slot) = std::max(0.0, a + direction * amp_step * std::max(a, 0.05 * spec.amplitude));
                } else if (slot < 2 * h) {
                    trial.phase(j, slot - h) += direction * phase_step;
                } else {
                    const double half = 0.5 * (chain.joint(j).upper - chain.joint(j).lower);
                    trial.offset(j) += direction * offset_step * half;
                }
                ++result.evaluations;
                double c = std::numeric_limits<double>::infinity();
                try {
                    trial = fit_to_limits(std::move(trial), chain, spec);
                    c = evaluate(trial);
                } catch (const InfeasibleError&) {
                }
                if (c < result.cond) {
                    result.cond = c;
                    result.trajectory = std::move(trial);
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) {
            amp_step *= 0.5;
            phase_step *= 0.5;
            offset_step *= 0.5;
            if (amp_step < 1e-4) {
                // Converged: restart the step sizes so the remaining budget still explores.
                amp_step = 0.5 * rng.uniform(0.5, 1.0);
                phase_step = 0.8 * rng.uniform(0.5, 1.0);
                offset_step = 0.1 * rng.uniform(0.5, 1.0);
            }
        }
    }
    if (!std::isfinite(result.cond)) {
        throw InfeasibleError("no excitation trajectory with a full-rank base regressor within the budget");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Identified rigid-body model

struct IdentifiedRbdModel {
    RobotChain chain;
    BaseParameterMap base;
    Eigen::VectorXd phi_b;
    Eigen::VectorXd residual_mse;  ///< per joint [Nm^2]
    double condition = std::numeric_limits<double>::infinity();
};

/// tau_RBD = K(s) restricted to the base columns times phi_b.
inline Eigen::VectorXd predict_rbd(const IdentifiedRbdModel& model, const JointState& s) {
    const Eigen::MatrixXd k = regressor(model.chain, s);
    Eigen::VectorXd tau = Eigen::VectorXd::Zero(model.chain.size());
    for (int c = 0; c < model.base.rank(); ++c) {
        tau += k.col(model.base.columns[static_cast<std::size_t>(c)]) * model.phi_b(c);
    }
    return tau;
}

/// Full pipeline on a stacked system: reduce, solve, and record diagnostics.
inline IdentifiedRbdModel identify_rbd(const RobotChain& chain, const StackedSystem& system,
                                       double rank_tol = 1e-8) {
    IdentifiedRbdModel model;
    model.chain = chain;
    model.base = base_reduction(system.k, rank_tol);
    const Eigen::MatrixXd kb = model.base.select(system.k);
    model.phi_b = identify(kb, system.tau);
    model.condition = condition_number(kb);
    const int n = chain.size();
    const Eigen::VectorXd residual = kb * model.phi_b - system.tau;
    model.residual_mse = Eigen::VectorXd::Zero(n);
    const Eigen::Index samples = residual.size() / n;
    for (Eigen::Index i = 0; i < residual.size(); ++i) {
        model.residual_mse(i % n) += residual(i) * residual(i);
    }
    model.residual_mse /= static_cast<double>(samples);
    return model;
}

inline IdentifiedRbdModel identify_rbd(const RobotChain& chain, const ObservationSet& obs, double rank_tol = 1e-8) {
    return identify_rbd(chain, stack_regressor(chain, obs), rank_tol);
}

inline TextDocument rbd_model_document(const IdentifiedRbdModel& model) {
    TextDocument doc;
    auto& s = doc.add("rbd_model");
    s.set("version", "1");
    s.set("full_columns", std::to_string(model.base.full_columns));
    std::string cols;
    for (int c : model.base.columns) {
        cols += (cols.empty() ? "" : " ") + std::to_string(c);
    }
    s.set("columns", cols);
    s.set("phi_b", join_doubles(model.phi_b));
    s.set("residual_mse", join_doubles(model.residual_mse));
    s.set("condition", format_double(model.condition));
    auto& m = doc.add("map");
    for (Eigen::Index r = 0; r < model.base.map.rows(); ++r) {
        m.set("row", join_doubles(model.base.map.row(r)));
    }
    append_robot(doc, model.chain);
    return doc;
}

inline IdentifiedRbdModel rbd_model_from_document(const TextDocument& doc, const std::string& origin = "<model>") {
    const TextSection* s = doc.find("rbd_model");
    if (!s) {
        throw IoError(origin + ": missing [rbd_model] section");
    }
    IdentifiedRbdModel model;
    model.chain = robot_from_document(doc);
    model.base.full_columns = static_cast<int>(s->get_int("full_columns", 0));
    for (double c : parse_doubles(s->find("columns").value_or(""))) {
        model.base.columns.push_back(static_cast<int>(c));
    }
    const auto phi = s->get_doubles("phi_b");
    model.phi_b = Eigen::Map<const Eigen::VectorXd>(phi.data(), static_cast<Eigen::Index>(phi.size()));
    const auto mse = parse_doubles(s->find("residual_mse").value_or(""));
    model.residual_mse = Eigen::Map<const Eigen::VectorXd>(mse.data(), static_cast<Eigen::Index>(mse.size()));
    model.condition = s->get_double("condition", std::numeric_limits<double>::infinity());
    const int rank = model.base.rank();
    if (model.base.full_columns != kParamsPerLink * model.chain.size() || model.phi_b.size() != rank) {
        throw IoError(origin + ": base parameter dimensions do not match the robot");
    }
    model.base.map = Eigen::MatrixXd::Zero(rank, model.base.full_columns);
    const TextSection* m = doc.find("map");
    const auto rows = m ? m->get_all("row") : std::vector<std::string>{};
    if (static_cast<int>(rows.size()) != rank) {
        throw IoError(origin + ": [map] must hold one row per base parameter");
    }
    for (int r = 0; r < rank; ++r) {
        const auto v = parse_doubles(rows[static_cast<std::size_t>(r)]);
        if (static_cast<int>(v.size()) != model.base.full_columns) {
            throw IoError(origin + ": map row " + std::to_string(r + 1) + " has the wrong length");
        }
        model.base.map.row(r) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    return model;
}

inline void save_rbd_model(const std::string& path, const IdentifiedRbdModel& model) {
    rbd_model_document(model).save(path);
}

inline IdentifiedRbdModel load_rbd_model(const std::string& path) {
    return rbd_model_from_document(TextDocument::load(path), path);
}

}  // namespace lidym
