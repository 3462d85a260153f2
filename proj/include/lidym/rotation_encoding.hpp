#pragma once

/**
 * @file rotation_encoding.hpp
 * @brief Rotational history encoding: per joint, the signed rotation since
 *        the last reversal of motion direction, clamped to +-10 degrees.
 */

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "lidym/errors.hpp"

namespace lidym {

/// Position changes at or below this magnitude [rad] neither move nor reverse the encoder.
constexpr double kRotationDeadband = 1e-5;

/// Saturation of the encoding, 10 degrees in radians.
constexpr double kRotationClamp = 10.0 * std::numbers::pi / 180.0;

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/**
 * Encoder state per joint. direction is 0 (unset), +1 or -1; anchor is the
 * position at the last reversal; previous is the last position that moved
 * the encoder (changes inside the deadband do not update it).
 */
struct RotationHistoryState {
    Eigen::VectorXi direction;
    Eigen::VectorXd anchor;
    Eigen::VectorXd previous;
    Eigen::VectorXd r;
    bool started = false;

    static RotationHistoryState fresh(Eigen::Index joints) {
        RotationHistoryState s;
        s.direction = Eigen::VectorXi::Zero(joints);
        s.anchor = Eigen::VectorXd::Zero(joints);
        s.previous = Eigen::VectorXd::Zero(joints);
        s.r = Eigen::VectorXd::Zero(joints);
        return s;
    }

    Eigen::Index joints() const { return r.size(); }
};

inline double clamp_rotation(double value) { return std::clamp(value, -kRotationClamp, kRotationClamp); }

/// Advances the encoder by one position sample and returns the encoding r [rad].
inline const Eigen::VectorXd& encoder_update(RotationHistoryState& state, const Eigen::VectorXd& q) {
    if (q.size() != state.joints()) {
        throw ContractError("rotation encoder: position has " + std::to_string(q.size()) + " joints, state has " +
                            std::to_string(state.joints()));
    }
    if (!q.allFinite()) {
        throw InputDomainError("rotation encoder: non-finite joint position");
    }
    if (!state.started) {
        state.previous = q;
        state.anchor = q;
        state.started = true;
        return state.r;
    }
    for (Eigen::Index j = 0; j < q.size(); ++j) {
        const double delta = q(j) - state.previous(j);
        if (std::abs(delta) <= kRotationDeadband) {
            continue;
        }
        const int dir = delta > 0.0 ? 1 : -1;
        if (dir != state.direction(j)) {
            state.anchor(j) = state.previous(j);
            state.direction(j) = dir;
        }
        state.r(j) = clamp_rotation(q(j) - state.anchor(j));
        state.previous(j) = q(j);
    }
    return state.r;
}

/// Folds encoder_update over the columns of q (joints x samples) from a fresh state.
inline Eigen::MatrixXd encode_trajectory(const Eigen::MatrixXd& q) {
    if (q.cols() < 1) {
        throw ContractError("encode_trajectory needs at least one sample");
    }
    RotationHistoryState state = RotationHistoryState::fresh(q.rows());
    Eigen::MatrixXd r(q.rows(), q.cols());
    for (Eigen::Index k = 0; k < q.cols(); ++k) {
        r.col(k) = encoder_update(state, q.col(k));
    }
    return r;
}

}  // namespace lidym
