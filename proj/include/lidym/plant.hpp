#pragma once

/**
 * @file plant.hpp
 * @brief Synthetic ground-truth plant. Configuration paths are time
 *        parameterized and replayed kinematically; "measured" torques are
 *        rigid-body torques plus play-operator hysteresis, Stribeck friction,
 *        position ripple and sensor noise. Datasets are CSV files.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lidym/chain.hpp"
#include "lidym/csv.hpp"
#include "lidym/dynamics.hpp"
#include "lidym/errors.hpp"
#include "lidym/identification.hpp"
#include "lidym/limopa.hpp"
#include "lidym/random.hpp"
#include "lidym/text_format.hpp"

namespace lidym {

// ---------------------------------------------------------------------------
// Time parameterization

/// Rest-to-rest trapezoidal velocity profile of a scalar path coordinate s in [0, distance].
struct TrapezoidProfile {
    double distance = 0.0;
    double peak = 0.0;   ///< reached ds/dt
    double accel = 0.0;  ///< |d2s/dt2| during the ramps
    double ramp = 0.0;   ///< duration of each ramp
    double cruise = 0.0; ///< duration at peak rate

    double duration() const { return 2.0 * ramp + cruise; }

    /// Profile limited by max_rate with ramps of ramp_time; short moves become triangular.
    static TrapezoidProfile make(double distance, double max_rate, double ramp_time) {
        if (!(distance > 0.0) || !(max_rate > 0.0) || !(ramp_time > 0.0)) {
            throw ContractError("trapezoid profile needs positive distance, rate and ramp time");
        }
        TrapezoidProfile p;
        p.distance = distance;
        p.accel = max_rate / ramp_time;
        if (distance >= max_rate * ramp_time) {
            p.peak = max_rate;
            p.ramp = ramp_time;
            p.cruise = (distance - max_rate * ramp_time) / max_rate;
        } else {
            p.peak = std::sqrt(p.accel * distance);
            p.ramp = p.peak / p.accel;
            p.cruise = 0.0;
        }
        return p;
    }

    /// (s, ds/dt, d2s/dt2) at time t, clamped to [0, duration].
    std::array<double, 3> at(double t) const {
        t = std::clamp(t, 0.0, duration());
        if (t < ramp) {
            return {0.5 * accel * t * t, accel * t, accel};
        }
        const double s_ramp = 0.5 * peak * ramp;
        if (t <= ramp + cruise) {
            return {s_ramp + peak * (t - ramp), peak, 0.0};
        }
        const double td = duration() - t;
        return {distance - 0.5 * accel * td * td, accel * td, -accel};
    }
};

/**
 * One rest-to-rest piece of motion: a straight line between two
 * configurations, or a Catmull-Rom spline through a waypoint block, both
 * traversed along their index coordinate s with a trapezoidal profile.
 */
struct TimedSegment {
    Eigen::MatrixXd points;  ///< joints x M, M >= 2, s in [0, M - 1]
    Eigen::MatrixXd tangents;
    TrapezoidProfile profile;
    double start = 0.0;
    PathPhase phase = PathPhase::scaffold;

    double end() const { return start + profile.duration(); }

    /// Curve position, first and second derivative with respect to s.
    void curve(double s, Eigen::VectorXd& c, Eigen::VectorXd& d1, Eigen::VectorXd& d2) const {
        const Eigen::Index m = points.cols();
        const Eigen::Index i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(s)), 0, m - 2);
        const double u = std::clamp(s - static_cast<double>(i), 0.0, 1.0);
        const auto p0 = points.col(i);
        const auto p1 = points.col(i + 1);
        const auto m0 = tangents.col(i);
        const auto m1 = tangents.col(i + 1);
        const double u2 = u * u, u3 = u2 * u;
        c = (2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * p1 + (u3 - u2) * m1;
        d1 = (6 * u2 - 6 * u) * p0 + (3 * u2 - 4 * u + 1) * m0 + (-6 * u2 + 6 * u) * p1 + (3 * u2 - 2 * u) * m1;
        d2 = (12 * u - 6) * p0 + (6 * u - 4) * m0 + (-12 * u + 6) * p1 + (6 * u - 2) * m1;
    }

    JointState state(double t) const {
        const auto [s, sd, sdd] = profile.at(t - start);
        Eigen::VectorXd c, d1, d2;
        curve(s, c, d1, d2);
        return JointState{c, d1 * sd, d2 * sd * sd + d1 * sdd};
    }

    /// Builds the segment. Tangents are Catmull-Rom central differences,
    /// one-sided at the ends; two points give a straight line.
    static TimedSegment make(Eigen::MatrixXd points, double speed_factor, const Eigen::VectorXd& velocity_limits,
                             double ramp_time, PathPhase phase) {
        TimedSegment seg;
        const Eigen::Index m = points.cols();
        seg.points = std::move(points);
        seg.phase = phase;
        seg.tangents.resize(seg.points.rows(), m);
        for (Eigen::Index i = 0; i < m; ++i) {
            if (m == 2) {
                seg.tangents.col(i) = seg.points.col(1) - seg.points.col(0);
            } else if (i == 0) {
                seg.tangents.col(i) = seg.points.col(1) - seg.points.col(0);
            } else if (i == m - 1) {
                seg.tangents.col(i) = seg.points.col(m - 1) - seg.points.col(m - 2);
            } else {
                seg.tangents.col(i) = 0.5 * (seg.points.col(i + 1) - seg.points.col(i - 1));
            }
        }
        // Largest |dq_j/ds| / vlim_j over the curve; dq/ds is quadratic per piece.
        double worst = 0.0;
        for (Eigen::Index i = 0; i + 1 < m; ++i) {
            const Eigen::VectorXd p0 = seg.points.col(i), p1 = seg.points.col(i + 1);
            const Eigen::VectorXd m0 = seg.tangents.col(i), m1 = seg.tangents.col(i + 1);
            const Eigen::VectorXd a = 6 * p0 + 3 * m0 - 6 * p1 + 3 * m1;
            const Eigen::VectorXd b = -6 * p0 - 4 * m0 + 6 * p1 - 2 * m1;
            for (Eigen::Index j = 0; j < a.size(); ++j) {
                double peak = std::max(std::abs(m0(j)), std::abs(a(j) + b(j) + m0(j)));
                if (a(j) != 0.0) {
                    const double u = -b(j) / (2.0 * a(j));
                    if (u > 0.0 && u < 1.0) peak = std::max(peak, std::abs(a(j) * u * u + b(j) * u + m0(j)));
                }
                worst = std::max(worst, peak / velocity_limits(j));
            }
        }
        seg.profile = TrapezoidProfile::make(static_cast<double>(m - 1), speed_factor / worst, ramp_time);
        return seg;
    }
};

struct TimingConfig {
    double ramp_time = 0.2;  ///< [s] acceleration phase of every rest-to-rest piece
};

/// Piecewise rest-to-rest motion through a configuration path.
class TimedPath {
public:
    TimedPath() = default;

    TimedPath(const ConfigPath& path, const RobotChain& chain, const TimingConfig& timing = {}) {
        if (path.size() == 0) throw ContractError("time_parameterize: empty path");
        if (path.joints() != chain.size()) throw ContractError("time_parameterize: path and chain joint counts differ");
        start_ = path.q.col(0);
        const Eigen::VectorXd vlim = chain.velocity_limits();
        Eigen::VectorXd current = start_;
        double t = 0.0;
        int i = 1;
        while (i < path.size()) {
            const auto phase = path.phase[static_cast<std::size_t>(i)];
            const double factor = path.speed_factor[static_cast<std::size_t>(i)];
            if (!(factor > 0.0) || factor > 1.0) {
                throw ContractError("speed factors must lie in (0, 1]");
            }
            std::vector<Eigen::VectorXd> pts{current};
            if (phase == PathPhase::scaffold) {
                pts.push_back(path.q.col(i));
                ++i;
            } else {
                while (i < path.size() && path.phase[static_cast<std::size_t>(i)] == PathPhase::explore) {
                    pts.push_back(path.q.col(i));
                    ++i;
                }
            }
            std::vector<Eigen::VectorXd> distinct{pts.front()};
            for (std::size_t k = 1; k < pts.size(); ++k) {
                if (pts[k] != distinct.back()) distinct.push_back(pts[k]);
            }
            if (distinct.size() < 2) continue;
            Eigen::MatrixXd block(chain.size(), static_cast<Eigen::Index>(distinct.size()));
            for (std::size_t k = 0; k < distinct.size(); ++k) block.col(static_cast<Eigen::Index>(k)) = distinct[k];
            TimedSegment seg = TimedSegment::make(std::move(block), factor, vlim, timing.ramp_time, phase);
            seg.start = t;
            t = seg.end();
            current = distinct.back();
            segments_.push_back(std::move(seg));
        }
        duration_ = t;
    }

    double duration() const { return duration_; }
    const std::vector<TimedSegment>& segments() const { return segments_; }

    JointState state(double t) const {
        const TimedSegment* seg = find(t);
        if (!seg) {
            JointState s = JointState::zeros(static_cast<int>(start_.size()));
            s.q = segments_.empty() || t <= 0.0 ? start_ : Eigen::VectorXd(segments_.back().points.rightCols(1));
            return s;
        }
        return seg->state(t);
    }

    PathPhase phase(double t) const {
        const TimedSegment* seg = find(t);
        return seg ? seg->phase : PathPhase::scaffold;
    }

private:
    const TimedSegment* find(double t) const {
        if (segments_.empty() || t < 0.0 || t > duration_) return nullptr;
        auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                                   [](double value, const TimedSegment& s) { return value < s.start; });
        return &*std::prev(it);
    }

    Eigen::VectorXd start_;
    std::vector<TimedSegment> segments_;
    double duration_ = 0.0;
};

/// Uniformly sampled kinematic trajectory, joints x samples.
struct KinematicTrajectory {
    double rate = 100.0;
    Eigen::VectorXd t;
    Eigen::MatrixXd q, qd, qdd;
    std::vector<PathPhase> phase;

    int size() const { return static_cast<int>(t.size()); }
    int joints() const { return static_cast<int>(q.rows()); }
    JointState state(int k) const { return JointState{q.col(k), qd.col(k), qdd.col(k)}; }
};

inline KinematicTrajectory sample_timed_path(const TimedPath& timed, double rate) {
    if (!(rate > 0.0)) throw ContractError("sample rate must be positive");
    const int count = static_cast<int>(std::floor(timed.duration() * rate + 1e-9)) + 1;
    const int n = static_cast<int>(timed.state(0.0).q.size());
    KinematicTrajectory out;
    out.rate = rate;
    out.t.resize(count);
    out.q.resize(n, count);
    out.qd.resize(n, count);
    out.qdd.resize(n, count);
    out.phase.resize(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const double t = k / rate;
        const JointState s = timed.state(t);
        out.t(k) = t;
        out.q.col(k) = s.q;
        out.qd.col(k) = s.qd;
        out.qdd.col(k) = s.qdd;
        out.phase[static_cast<std::size_t>(k)] = timed.phase(t);
    }
    return out;
}

inline KinematicTrajectory time_parameterize(const ConfigPath& path, const RobotChain& chain, double rate,
                                             const TimingConfig& timing = {}) {
    return sample_timed_path(TimedPath(path, chain, timing), rate);
}

/// Samples `duration` seconds of a Fourier trajectory at `rate`.
inline KinematicTrajectory sample_fourier(const FourierTrajectory& traj, double rate, double duration) {
    if (!(rate > 0.0) || !(duration > 0.0)) throw ContractError("sample_fourier needs positive rate and duration");
    const int count = static_cast<int>(std::floor(duration * rate + 1e-9)) + 1;
    KinematicTrajectory out;
    out.rate = rate;
    out.t.resize(count);
    out.q.resize(traj.joints(), count);
    out.qd.resize(traj.joints(), count);
    out.qdd.resize(traj.joints(), count);
    out.phase.assign(static_cast<std::size_t>(count), PathPhase::explore);
    for (int k = 0; k < count; ++k) {
        const JointState s = traj.state(k / rate);
        out.t(k) = k / rate;
        out.q.col(k) = s.q;
        out.qd.col(k) = s.qd;
        out.qdd.col(k) = s.qdd;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Plant

/// Per-joint plant constants; vectors have one entry per joint.
struct PlantModel {
    RobotChain chain;
    Eigen::VectorXd phi;                   ///< true link parameters (12 per link)
    Eigen::VectorXd play_width;            ///< w [rad]
    Eigen::VectorXd hysteresis_stiffness;  ///< k_h [Nm]
    Eigen::VectorXd hysteresis_shape;      ///< alpha [1/rad]
    Eigen::VectorXd static_friction;       ///< F_s [Nm]
    Eigen::VectorXd stribeck_velocity;     ///< v_s [rad/s]
    Eigen::VectorXd ripple_amplitude;      ///< [Nm]
    Eigen::VectorXd ripple_frequency;      ///< [1/rad]
    double torque_noise = 0.02;            ///< sigma_tau [Nm]
    double position_noise = 1e-5;          ///< sigma_q [rad]

    int joints() const { return chain.size(); }

    /// Default constants: w = 0.5 deg, k_h = 2, alpha = 10, F_s = 1.5 F_c, v_s = 0.05, ripple 0.05 Nm at 10 / rad.
    static PlantModel with_defaults(const RobotChain& chain, const Eigen::VectorXd& phi) {
        check_parameter_dimension(chain, phi);
        const int n = chain.size();
        PlantModel p;
        p.chain = chain;
        p.phi = phi;
        p.play_width = Eigen::VectorXd::Constant(n, 0.5 * kDegToRad);
        p.hysteresis_stiffness = Eigen::VectorXd::Constant(n, 2.0);
        p.hysteresis_shape = Eigen::VectorXd::Constant(n, 10.0);
        p.static_friction.resize(n);
        for (int j = 0; j < n; ++j) p.static_friction(j) = 1.5 * phi(kParamsPerLink * j + kCoulomb);
        p.stribeck_velocity = Eigen::VectorXd::Constant(n, 0.05);
        p.ripple_amplitude = Eigen::VectorXd::Constant(n, 0.05);
        p.ripple_frequency = Eigen::VectorXd::Constant(n, 10.0);
        return p;
    }

    /// Rigid body part only: every additive effect and all noise switched off.
    PlantModel rigid_only() const {
        PlantModel p = *this;
        p.hysteresis_stiffness.setZero();
        for (int j = 0; j < joints(); ++j) p.static_friction(j) = phi(kParamsPerLink * j + kCoulomb);
        p.ripple_amplitude.setZero();
        p.torque_noise = 0.0;
        p.position_noise = 0.0;
        return p;
    }

    double coulomb(int j) const { return phi(kParamsPerLink * j + kCoulomb); }

    void validate() const {
        check_parameter_dimension(chain, phi);
        const int n = joints();
        for (const Eigen::VectorXd* v : {&play_width, &hysteresis_stiffness, &hysteresis_shape, &static_friction,
                                         &stribeck_velocity, &ripple_amplitude, &ripple_frequency}) {
            if (v->size() != n) throw ContractError("plant constants need one entry per joint");
        }
        if ((play_width.array() < 0.0).any() || (hysteresis_stiffness.array() < 0.0).any() || torque_noise < 0.0 ||
            position_noise < 0.0) {
            throw ContractError("plant play width, hysteresis stiffness and noise levels must be non-negative");
        }
        if (!(stribeck_velocity.array() > 0.0).all()) throw ContractError("Stribeck velocity must be positive");
    }

    /// Short hash of every constant, used to tag generated datasets.
    std::string digest() const {
        std::string text;
        for (const Eigen::VectorXd* v : {&phi, &play_width, &hysteresis_stiffness, &hysteresis_shape, &static_friction,
                                         &stribeck_velocity, &ripple_amplitude, &ripple_frequency}) {
            text += join_doubles(*v) + ";";
        }
        text += format_double(torque_noise) + ";" + format_double(position_noise);
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : text) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }
};

/// Play (backlash) operator: z follows q once q leaves the band [z - w, z + w].
inline double play_update(double z, double q, double w) { return std::min(q + w, std::max(q - w, z)); }

/// Per-sample torque contributions, joints x samples.
struct TorqueComponents {
    Eigen::MatrixXd rigid;       ///< rnea with the true parameters (includes viscous and Coulomb terms)
    Eigen::MatrixXd hysteresis;
    Eigen::MatrixXd stribeck;    ///< static friction excess over Coulomb
    Eigen::MatrixXd ripple;
    Eigen::MatrixXd noise;
    Eigen::MatrixXd play_state;  ///< z
};

/// Contiguous recordings of (t, q, tau) with segment ids; joints x samples.
struct Dataset {
    double rate = 100.0;
    Eigen::VectorXd t;
    Eigen::VectorXi segment;
    Eigen::MatrixXd q;
    Eigen::MatrixXd tau;
    std::vector<std::pair<std::string, std::string>> metadata;

    int size() const { return static_cast<int>(t.size()); }
    int joints() const { return static_cast<int>(q.rows()); }

    /// [begin, end) sample ranges of consecutive equal segment ids.
    std::vector<std::pair<int, int>> segment_ranges() const {
        std::vector<std::pair<int, int>> out;
        int begin = 0;
        for (int k = 1; k <= size(); ++k) {
            if (k == size() || segment(k) != segment(begin)) {
                out.emplace_back(begin, k);
                begin = k;
            }
        }
        return out;
    }

    std::string meta(const std::string& key) const {
        for (const auto& [k, v] : metadata) {
            if (k == key) return v;
        }
        return {};
    }

    void set_meta(const std::string& key, const std::string& value) {
        for (auto& [k, v] : metadata) {
            if (k == key) {
                v = value;
                return;
            }
        }
        metadata.emplace_back(key, value);
    }

    /// Appends `other` as new segments numbered after the existing ones.
    void append(const Dataset& other) {
        if (size() > 0 && (other.joints() != joints() || other.rate != rate)) {
            throw ContractError("datasets with different joints or rates cannot be concatenated");
        }
        const int n = size(), m = other.size();
        if (m == 0) return;
        const int offset = (n > 0 ? segment.maxCoeff() + 1 : 0) - other.segment.minCoeff();
        if (n == 0) {
            rate = other.rate;
            q.resize(other.joints(), 0);
            tau.resize(other.joints(), 0);
        }
        t.conservativeResize(n + m);
        segment.conservativeResize(n + m);
        q.conservativeResize(other.joints(), n + m);
        tau.conservativeResize(other.joints(), n + m);
        t.tail(m) = other.t;
        segment.tail(m) = other.segment.array() + offset;
        q.rightCols(m) = other.q;
        tau.rightCols(m) = other.tau;
    }
};

/**
 * Replays a kinematic trajectory on the plant. Hysteresis acts on the true
 * position with the play state starting at q(0); the returned positions carry
 * N(0, sigma_q^2) sensor noise.
 */
inline Dataset sense_torques(const PlantModel& plant, const KinematicTrajectory& traj, std::uint64_t seed,
                             TorqueComponents* parts = nullptr) {
    plant.validate();
    if (traj.joints() != plant.joints()) throw ContractError("trajectory and plant joint counts differ");
    const int n = plant.joints();
    const int count = traj.size();
    Rng rng(seed);
    Dataset out;
    out.rate = traj.rate;
    out.t = traj.t;
    out.segment = Eigen::VectorXi::Zero(count);
    out.q.resize(n, count);
    out.tau.resize(n, count);
    TorqueComponents local;
    TorqueComponents& c = parts ? *parts : local;
    for (Eigen::MatrixXd* m : {&c.rigid, &c.hysteresis, &c.stribeck, &c.ripple, &c.noise, &c.play_state}) {
        m->resize(n, count);
    }
    Eigen::VectorXd z = count > 0 ? Eigen::VectorXd(traj.q.col(0)) : Eigen::VectorXd::Zero(n);
    for (int k = 0; k < count; ++k) {
        const JointState s = traj.state(k);
        c.rigid.col(k) = rnea(plant.chain, plant.phi, s);
        for (int j = 0; j < n; ++j) {
            z(j) = play_update(z(j), s.q(j), plant.play_width(j));
            c.play_state(j, k) = z(j);
            c.hysteresis(j, k) =
                plant.hysteresis_stiffness(j) * std::tanh(plant.hysteresis_shape(j) * (s.q(j) - z(j)));
            const double v = s.qd(j) / plant.stribeck_velocity(j);
            c.stribeck(j, k) = (plant.static_friction(j) - plant.coulomb(j)) * std::exp(-v * v) * signum(s.qd(j));
            c.ripple(j, k) = plant.ripple_amplitude(j) * std::sin(plant.ripple_frequency(j) * s.q(j));
            c.noise(j, k) = rng.normal(0.0, plant.torque_noise);
        }
        for (int j = 0; j < n; ++j) out.q(j, k) = s.q(j) + rng.normal(0.0, plant.position_noise);
    }
    out.tau = c.rigid + c.hysteresis + c.stribeck + c.ripple + c.noise;
    return out;
}

/// time_parameterize -> sense_torques with seeds recorded as metadata.
inline Dataset generate_dataset(const PlantModel& plant, const ConfigPath& path, double rate, std::uint64_t plant_seed,
                                std::uint64_t path_seed, const TimingConfig& timing = {}) {
    Dataset d = sense_torques(plant, time_parameterize(path, plant.chain, rate, timing), plant_seed);
    d.set_meta("rate", format_double(rate));
    d.set_meta("plant_seed", std::to_string(plant_seed));
    d.set_meta("path_seed", std::to_string(path_seed));
    d.set_meta("plant_digest", plant.digest());
    d.set_meta("ramp_time", format_double(timing.ramp_time));
    return d;
}

// ---------------------------------------------------------------------------
// Dataset files: CSV t,seg,q1..qn,tau1..taun with "# key = value" metadata lines

inline std::string dataset_to_csv(const Dataset& d) {
    std::ostringstream out;
    out << "# rate = " << format_double(d.rate) << '\n';
    for (const auto& [k, v] : d.metadata) {
        if (k != "rate") out << "# " << k << " = " << v << '\n';
    }
    out << "t,seg";
    for (int j = 0; j < d.joints(); ++j) out << ",q" << j + 1;
    for (int j = 0; j < d.joints(); ++j) out << ",tau" << j + 1;
    out << '\n';
    for (int k = 0; k < d.size(); ++k) {
        out << format_double(d.t(k)) << ',' << d.segment(k);
        for (int j = 0; j < d.joints(); ++j) out << ',' << format_double(d.q(j, k));
        for (int j = 0; j < d.joints(); ++j) out << ',' << format_double(d.tau(j, k));
        out << '\n';
    }
    return out.str();
}

inline void save_dataset(const std::string& file, const Dataset& d) { write_text_file(file, dataset_to_csv(d)); }

inline Dataset dataset_from_csv(const CsvTable& table) {
    int joints = 0;
    while (table.column_index("q" + std::to_string(joints + 1)) >= 0) ++joints;
    if (joints == 0) throw IoError(table.origin + ": dataset has no q1 column");
    Dataset d;
    const std::string rate = table.metadata("rate");
    if (rate.empty()) throw IoError(table.origin + ": dataset lacks the '# rate = ...' metadata line");
    d.rate = parse_double(rate);
    for (const auto& line : table.comments) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim(line.substr(0, eq));
        if (key != "rate") d.metadata.emplace_back(key, trim(line.substr(eq + 1)));
    }
    d.t = table.numeric_column("t");
    const Eigen::VectorXd seg = table.numeric_column("seg");
    d.segment = seg.cast<int>();
    if ((d.segment.cast<double>() - seg).cwiseAbs().maxCoeff() > 0.0) {
        throw IoError(table.origin + ": segment ids must be integers");
    }
    d.q.resize(joints, table.rows_count());
    d.tau.resize(joints, table.rows_count());
    for (int j = 0; j < joints; ++j) {
        d.q.row(j) = table.numeric_column("q" + std::to_string(j + 1)).transpose();
        d.tau.row(j) = table.numeric_column("tau" + std::to_string(j + 1)).transpose();
    }
    return d;
}

inline Dataset load_dataset(const std::string& file) { return dataset_from_csv(read_csv(file)); }

inline PlantModel plant_from_section(const TextSection& s, PlantModel p) {
    auto per_joint = [&](const char* key, Eigen::VectorXd& v) {
        if (auto value = s.find(key)) {
            const auto numbers = parse_doubles(*value);
            if (numbers.size() == 1) {
                v.setConstant(numbers[0]);
            } else if (static_cast<Eigen::Index>(numbers.size()) == v.size()) {
                v = Eigen::Map<const Eigen::VectorXd>(numbers.data(), v.size());
            } else {
                throw IoError(std::string("[plant] ") + key + " needs 1 or " + std::to_string(v.size()) + " values");
            }
        }
    };
    if (s.has("play_width_deg")) {
        per_joint("play_width_deg", p.play_width);
        p.play_width *= kDegToRad;
    }
    per_joint("hysteresis_stiffness", p.hysteresis_stiffness);
    per_joint("hysteresis_shape", p.hysteresis_shape);
    if (auto r = s.find("static_friction_ratio")) {
        const double ratio = parse_double(trim(*r));
        for (int j = 0; j < p.joints(); ++j) p.static_friction(j) = ratio * p.coulomb(j);
    }
    per_joint("stribeck_velocity", p.stribeck_velocity);
    per_joint("ripple_amplitude", p.ripple_amplitude);
    per_joint("ripple_frequency", p.ripple_frequency);
    p.torque_noise = s.get_double("torque_noise", p.torque_noise);
    p.position_noise = s.get_double("position_noise", p.position_noise);
    p.validate();
    return p;
}

}  // namespace lidym
