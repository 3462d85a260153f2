#pragma once

/**
 * @file filter.hpp
 * @brief Zero-phase Butterworth low-pass filtering and the measurement
 *        preprocessing that turns raw positions and torques into
 *        differentiated, trimmed observation sets.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "lidym/chain.hpp"
#include "lidym/errors.hpp"

namespace lidym {

/// Second-order IIR section, a(0) normalized to 1.
struct BiquadCoefficients {
    std::array<double, 3> b{};
    std::array<double, 3> a{};

    double dc_gain() const { return (b[0] + b[1] + b[2]) / (a[0] + a[1] + a[2]); }
};

/// Second-order Butterworth low-pass via the bilinear transform with frequency prewarping.
inline BiquadCoefficients butterworth_lowpass(double cutoff_hz, double rate_hz) {
    if (!(rate_hz > 0.0) || !(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * rate_hz)) {
        throw ContractError("butterworth cutoff must lie in (0, rate/2)");
    }
    const double k = std::tan(std::numbers::pi * cutoff_hz / rate_hz);
    const double k2 = k * k;
    const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);
    BiquadCoefficients c;
    c.b = {k2 * norm, 2.0 * k2 * norm, k2 * norm};
    c.a = {1.0, 2.0 * (k2 - 1.0) * norm, (1.0 - std::numbers::sqrt2 * k + k2) * norm};
    return c;
}

namespace detail {

/// Direct form II transposed, state initialized to the steady state of a step of height x(0).
inline Eigen::VectorXd lfilter_steady(const BiquadCoefficients& c, const Eigen::VectorXd& x) {
    Eigen::VectorXd y(x.size());
    if (x.size() == 0) {
        return y;
    }
    const double g = c.dc_gain();
    double z1 = (c.b[2] - c.a[2] * g) * x(0);
    double z0 = (c.b[1] + c.b[2] - (c.a[1] + c.a[2]) * g) * x(0);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double out = c.b[0] * x(i) + z0;
        z0 = c.b[1] * x(i) - c.a[1] * out + z1;
        z1 = c.b[2] * x(i) - c.a[2] * out;
        y(i) = out;
    }
    return y;
}

}  // namespace detail

/**
 * Forward-backward filtering with odd reflection padding of `padlen` samples
 * (capped at n - 1) at both ends. The signal is filtered as a deviation from
 * its first sample so constant inputs come back bit-exact.
 */
inline Eigen::VectorXd filtfilt(const BiquadCoefficients& c, const Eigen::VectorXd& x, Eigen::Index padlen = 9) {
    const Eigen::Index n = x.size();
    if (n < 2) {
        return x;
    }
    const double base = x(0);
    const Eigen::VectorXd d = x.array() - base;
    const Eigen::Index pad = std::clamp<Eigen::Index>(padlen, 0, n - 1);

    Eigen::VectorXd ext(n + 2 * pad);
    for (Eigen::Index i = 0; i < pad; ++i) {
        ext(i) = 2.0 * d(0) - d(pad - i);
        ext(n + pad + i) = 2.0 * d(n - 1) - d(n - 2 - i);
    }
    ext.segment(pad, n) = d;

    Eigen::VectorXd forward = detail::lfilter_steady(c, ext);
    Eigen::VectorXd backward = detail::lfilter_steady(c, forward.reverse().eval());
    backward.reverseInPlace();
    return backward.segment(pad, n).array() + base;
}

struct FilterSpec {
    double cutoff_hz = 5.0;
    bool enabled = true;
    int padlen = 0;  ///< reflection padding; 0 selects 3 * rate / cutoff samples

    Eigen::Index padding(double rate) const {
        return padlen > 0 ? padlen : static_cast<Eigen::Index>(std::ceil(3.0 * rate / cutoff_hz));
    }
};

/// How q̇ and q̈ of an observation set were obtained.
enum class DerivativeSource { measured, central_difference };

/// Uniformly sampled observations; matrices hold one column per sample.
struct ObservationSet {
    double rate = 100.0;
    Eigen::VectorXd t;
    Eigen::MatrixXd q;
    Eigen::MatrixXd qd;
    Eigen::MatrixXd qdd;
    Eigen::MatrixXd tau_raw;       ///< unfiltered measured torques
    Eigen::MatrixXd tau;           ///< low-pass filtered torques
    DerivativeSource derivatives = DerivativeSource::central_difference;

    int size() const { return static_cast<int>(t.size()); }
    int joints() const { return static_cast<int>(q.rows()); }

    JointState state(int k) const { return JointState{q.col(k), qd.col(k), qdd.col(k)}; }
};

/// Samples removed at each end of a preprocessed recording.
constexpr int kTrimSamples = 2;

/**
 * Low-pass filters q and tau (zero phase), differentiates the filtered q by
 * central differences and trims kTrimSamples from both ends.
 *
 * @param t   sample times, strictly increasing with spacing 1/rate
 * @param q   joint positions, joints x samples
 * @param tau joint torques, joints x samples
 */
inline ObservationSet preprocess(const Eigen::VectorXd& t, const Eigen::MatrixXd& q, const Eigen::MatrixXd& tau,
                                 double rate, const FilterSpec& spec = {}) {
    const Eigen::Index n = t.size();
    if (q.cols() != n || tau.cols() != n || q.rows() != tau.rows()) {
        throw ContractError("preprocess: time, position and torque sample counts differ");
    }
    if (n < 2 * kTrimSamples + 1) {
        throw InputDomainError("preprocess needs at least 5 samples, got " + std::to_string(n));
    }
    if (!(rate > 0.0)) {
        throw ContractError("preprocess: rate must be positive");
    }
    if (!t.allFinite() || !q.allFinite() || !tau.allFinite()) {
        throw InputDomainError("preprocess: non-finite samples");
    }
    const double h = 1.0 / rate;
    for (Eigen::Index k = 1; k < n; ++k) {
        if (std::abs(t(k) - t(k - 1) - h) > 1e-9) {
            throw InputDomainError("preprocess: samples are not uniformly spaced at 1/rate near t = " +
                                   std::to_string(t(k)));
        }
    }

    Eigen::MatrixXd qf = q;
    Eigen::MatrixXd tf = tau;
    if (spec.enabled) {
        const BiquadCoefficients c = butterworth_lowpass(spec.cutoff_hz, rate);
        for (Eigen::Index j = 0; j < q.rows(); ++j) {
            qf.row(j) = filtfilt(c, q.row(j).transpose(), spec.padding(rate)).transpose();
            tf.row(j) = filtfilt(c, tau.row(j).transpose(), spec.padding(rate)).transpose();
        }
    }

    const Eigen::Index m = n - 2 * kTrimSamples;
    ObservationSet out;
    out.rate = rate;
    out.t = t.segment(kTrimSamples, m);
    out.q = qf.middleCols(kTrimSamples, m);
    out.qd.resize(q.rows(), m);
    out.qdd.resize(q.rows(), m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index c = k + kTrimSamples;
        out.qd.col(k) = (qf.col(c + 1) - qf.col(c - 1)) / (2.0 * h);
        out.qdd.col(k) = (qf.col(c + 1) - 2.0 * qf.col(c) + qf.col(c - 1)) / (h * h);
    }
    out.tau_raw = tau.middleCols(kTrimSamples, m);
    out.tau = tf.middleCols(kTrimSamples, m);
    out.derivatives = DerivativeSource::central_difference;
    return out;
}

}  // namespace lidym
