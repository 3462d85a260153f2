#pragma once

/**
 * @file limopa.hpp
 * @brief Locally isotropic motion path generation: feasible scaffold
 *        sampling, kd-tree greedy ordering, randomized Fourier exploration
 *        phases and assembly into an annotated configuration path.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lidym/chain.hpp"
#include "lidym/csv.hpp"
#include "lidym/errors.hpp"
#include "lidym/parallel.hpp"
#include "lidym/random.hpp"
#include "lidym/text_format.hpp"

namespace lidym {

/// Admissible end-effector region: a ball around the base, optionally restricted to x > 0, z > 0.
struct WorkspaceSpec {
    double radius = 0.8;
    bool front_upper_quadrant = true;

    void validate() const {
        if (!(radius > 0.0)) throw ContractError("workspace radius must be positive");
    }

    bool contains(const Eigen::Vector3d& p) const {
        if (p.norm() > radius) return false;
        return !front_upper_quadrant || (p.x() > 0.0 && p.z() > 0.0);
    }
};

struct ScaffoldConfig {
    Eigen::VectorXd q;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();  ///< end-effector position at q
};

/// Optional extra feasibility test on a joint configuration (e.g. a collision checker).
using FeasibilityPredicate = std::function<bool(const Eigen::VectorXd&)>;

/**
 * Draws uniform joint-space proposals inside the limit box until `count`
 * of them land in the workspace and pass `feasible`.
 *
 * @throws InfeasibleError when `max_attempts` consecutive proposals are rejected;
 *         the message names the constraint that rejected most of them.
 */
inline std::vector<ScaffoldConfig> sample_scaffolds(const RobotChain& chain, const WorkspaceSpec& workspace, int count,
                                                    std::uint64_t seed, const FeasibilityPredicate& feasible = {},
                                                    long long max_attempts = 1'000'000) {
    workspace.validate();
    if (count < 1) throw ContractError("sample_scaffolds: count must be at least 1");
    Rng rng(seed);
    const Eigen::VectorXd lo = chain.lower_limits();
    const Eigen::VectorXd hi = chain.upper_limits();
    std::array<long long, 4> rejected{};  // radius, x, z, predicate
    static const char* names[] = {"end effector outside the workspace sphere", "end effector behind the base (x <= 0)",
                                  "end effector below the base (z <= 0)", "user feasibility predicate"};
    std::vector<ScaffoldConfig> out;
    long long attempts = 0;
    while (static_cast<int>(out.size()) < count) {
        if (attempts >= max_attempts) {
            const auto worst = std::max_element(rejected.begin(), rejected.end()) - rejected.begin();
            throw InfeasibleError("no feasible scaffold within " + std::to_string(max_attempts) +
                                  " attempts; dominant rejection: " + names[worst]);
        }
        ++attempts;
        Eigen::VectorXd q(chain.size());
        for (int j = 0; j < chain.size(); ++j) q(j) = rng.uniform(lo(j), hi(j));
        const Eigen::Vector3d p = forward_kinematics(chain, q).end_effector;
        if (p.norm() > workspace.radius) {
            ++rejected[0];
        } else if (workspace.front_upper_quadrant && !(p.x() > 0.0)) {
            ++rejected[1];
        } else if (workspace.front_upper_quadrant && !(p.z() > 0.0)) {
            ++rejected[2];
        } else if (feasible && !feasible(q)) {
            ++rejected[3];
        } else {
            out.push_back(ScaffoldConfig{q, p});
            attempts = 0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

/// Static kd-tree over joint-space points supporting removal and nearest-neighbor queries.
class KdTree {
public:
    explicit KdTree(std::vector<Eigen::VectorXd> points) : points_(std::move(points)) {
        const int n = static_cast<int>(points_.size());
        nodes_.resize(static_cast<std::size_t>(n));
        node_of_.assign(static_cast<std::size_t>(n), -1);
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        root_ = build(order, 0, n, -1);
    }

    int size() const { return static_cast<int>(points_.size()); }
    int alive() const { return root_ < 0 ? 0 : nodes_[static_cast<std::size_t>(root_)].alive; }

    void remove(int index) {
        Node* node = &nodes_[static_cast<std::size_t>(node_of_.at(static_cast<std::size_t>(index)))];
        if (node->removed) return;
        node->removed = true;
        for (int n = node_of_[static_cast<std::size_t>(index)]; n >= 0; n = nodes_[static_cast<std::size_t>(n)].parent) {
            --nodes_[static_cast<std::size_t>(n)].alive;
        }
    }

    /// Nearest remaining point by squared Euclidean distance, ties to the lowest index.
    std::optional<int> nearest(const Eigen::VectorXd& query) const {
        Best best;
        search(root_, query, best);
        if (best.index < 0) return std::nullopt;
        return best.index;
    }

private:
    struct Node {
        int point = -1;
        int axis = 0;
        int left = -1;
        int right = -1;
        int parent = -1;
        int alive = 0;
        bool removed = false;
    };

    struct Best {
        double d2 = std::numeric_limits<double>::infinity();
        int index = -1;
    };

    int build(std::vector<int>& order, int begin, int end, int parent) {
        if (begin >= end) return -1;
        const Eigen::Index dim = points_[static_cast<std::size_t>(order[static_cast<std::size_t>(begin)])].size();
        Eigen::VectorXd lo = points_[static_cast<std::size_t>(order[static_cast<std::size_t>(begin)])];
        Eigen::VectorXd hi = lo;
        for (int i = begin; i < end; ++i) {
            const auto& p = points_[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        Eigen::Index axis = 0;
        if (dim > 0) (hi - lo).maxCoeff(&axis);
        const int mid = begin + (end - begin) / 2;
        std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end, [&](int a, int b) {
            const double va = points_[static_cast<std::size_t>(a)](axis);
            const double vb = points_[static_cast<std::size_t>(b)](axis);
            return va < vb || (va == vb && a < b);
        });
        const int point = order[static_cast<std::size_t>(mid)];
        const int id = point;  // one node per point, stored at the point's slot
        Node& node = nodes_[static_cast<std::size_t>(id)];
        node.point = point;
        node.axis = static_cast<int>(axis);
        node.parent = parent;
        node.alive = end - begin;
        node_of_[static_cast<std::size_t>(point)] = id;
        const int left = build(order, begin, mid, id);
        const int right = build(order, mid + 1, end, id);
        nodes_[static_cast<std::size_t>(id)].left = left;
        nodes_[static_cast<std::size_t>(id)].right = right;
        return id;
    }

    void search(int id, const Eigen::VectorXd& q, Best& best) const {
        if (id < 0) return;
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        if (node.alive == 0) return;
        const Eigen::VectorXd& p = points_[static_cast<std::size_t>(node.point)];
        if (!node.removed) {
            const double d2 = (p - q).squaredNorm();
            if (d2 < best.d2 || (d2 == best.d2 && node.point < best.index)) {
                best.d2 = d2;
                best.index = node.point;
            }
        }
        const double diff = q(node.axis) - p(node.axis);
        const int near = diff < 0.0 ? node.left : node.right;
        const int far = diff < 0.0 ? node.right : node.left;
        search(near, q, best);
        if (diff * diff <= best.d2) search(far, q, best);
    }

    std::vector<Eigen::VectorXd> points_;
    std::vector<Node> nodes_;
    std::vector<int> node_of_;
    int root_ = -1;
};

/// Greedy nearest-neighbor chain starting at element 0; returns the visiting order as indices.
inline std::vector<int> greedy_order(const std::vector<Eigen::VectorXd>& points) {
    if (points.empty()) throw ContractError("greedy_order needs at least one point");
    KdTree tree(points);
    std::vector<int> order{0};
    tree.remove(0);
    while (tree.alive() > 0) {
        const int next = *tree.nearest(points[static_cast<std::size_t>(order.back())]);
        tree.remove(next);
        order.push_back(next);
    }
    return order;
}

inline std::vector<ScaffoldConfig> order_scaffolds(const std::vector<ScaffoldConfig>& scaffolds) {
    std::vector<Eigen::VectorXd> points;
    points.reserve(scaffolds.size());
    for (const auto& s : scaffolds) points.push_back(s.q);
    std::vector<ScaffoldConfig> out;
    for (int i : greedy_order(points)) out.push_back(scaffolds[static_cast<std::size_t>(i)]);
    return out;
}

/// Sum of joint-space distances between consecutive configurations.
inline double path_length(const std::vector<ScaffoldConfig>& scaffolds) {
    double total = 0.0;
    for (std::size_t i = 1; i < scaffolds.size(); ++i) total += (scaffolds[i].q - scaffolds[i - 1].q).norm();
    return total;
}

// ---------------------------------------------------------------------------

struct ExplorationConfig {
    int summands = 3;
    double amplitude_min_deg = 0.5;
    double amplitude_max_deg = 3.0;
    double frequency_max_hz = 4.0;
    int length_min = 2000;
    int length_max = 2500;
    double tick_hz = 100.0;  ///< waypoint index -> phase time

    void validate() const {
        if (summands < 1 || !(amplitude_min_deg >= 0.0) || amplitude_max_deg < amplitude_min_deg ||
            !(frequency_max_hz >= 0.0) || length_min < 1 || length_max < length_min || !(tick_hz > 0.0)) {
            throw ContractError("invalid exploration configuration");
        }
    }
};

/**
 * Low-amplitude Fourier wiggle around a scaffold. Per joint j and summand k:
 * e_j(t) = sum_k A_jk sin(2 pi f_jk t + phi_jk), amplitudes in degrees,
 * t = index / tick_hz. Waypoints are anchor + e(t) - e(0), clamped to the limits.
 */
struct ExplorationPhase {
    Eigen::MatrixXd amplitude_deg;  ///< joints x summands
    Eigen::MatrixXd frequency_hz;
    Eigen::MatrixXd phase;
    Eigen::MatrixXd waypoints;      ///< joints x samples
    int samples = 0;

    int length() const { return samples; }
};

/// Draws the Fourier parameters and block length; waypoints are left empty.
inline ExplorationPhase draw_exploration(int joints, const ExplorationConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    ExplorationPhase e;
    e.amplitude_deg.resize(joints, config.summands);
    e.frequency_hz.resize(joints, config.summands);
    e.phase.resize(joints, config.summands);
    for (int j = 0; j < joints; ++j) {
        for (int k = 0; k < config.summands; ++k) {
            e.amplitude_deg(j, k) = rng.uniform(config.amplitude_min_deg, config.amplitude_max_deg);
            e.frequency_hz(j, k) = rng.uniform(-config.frequency_max_hz, config.frequency_max_hz);
            e.phase(j, k) = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
    }
    e.samples = static_cast<int>(rng.integer(config.length_min, config.length_max));
    return e;
}

inline ExplorationPhase exploration_phase(const RobotChain& chain, const Eigen::VectorXd& anchor,
                                          const ExplorationConfig& config, std::uint64_t seed) {
    if (anchor.size() != chain.size()) throw ContractError("exploration anchor has the wrong joint count");
    const int n = chain.size();
    ExplorationPhase e = draw_exploration(n, config, seed);
    const Eigen::VectorXd lo = chain.lower_limits();
    const Eigen::VectorXd hi = chain.upper_limits();
    e.waypoints.resize(n, e.samples);
    for (int j = 0; j < n; ++j) {
        double e0 = 0.0;
        for (int k = 0; k < config.summands; ++k) e0 += e.amplitude_deg(j, k) * std::sin(e.phase(j, k));
        for (int i = 0; i < e.samples; ++i) {
            const double t = i / config.tick_hz;
            double value = 0.0;
            for (int k = 0; k < config.summands; ++k) {
                value += e.amplitude_deg(j, k) * std::sin(2.0 * std::numbers::pi * e.frequency_hz(j, k) * t + e.phase(j, k));
            }
            e.waypoints(j, i) = std::clamp(anchor(j) + (value - e0) * kDegToRad, lo(j), hi(j));
        }
        e.waypoints(j, 0) = anchor(j);
    }
    return e;
}

// ---------------------------------------------------------------------------

enum class PathPhase { scaffold, explore };

inline const char* phase_name(PathPhase p) { return p == PathPhase::scaffold ? "scaf" : "explore"; }

/// Ordered waypoints with the phase and relative speed of the motion that reaches each of them.
struct ConfigPath {
    Eigen::MatrixXd q;                  ///< joints x waypoints
    std::vector<PathPhase> phase;
    std::vector<double> speed_factor;

    int size() const { return static_cast<int>(q.cols()); }
    int joints() const { return static_cast<int>(q.rows()); }
};

struct SpeedConfig {
    double reaching_min = 0.6;
    double reaching_max = 0.9;
    double exploring_min = 0.1;
    double exploring_max = 0.3;
};

/**
 * Concatenates [scaffold_1, exploration_1, scaffold_2, exploration_2, ...].
 * One reaching speed factor is drawn per scaffold and one exploring factor
 * per exploration block.
 */
inline ConfigPath assemble_path(const RobotChain& chain, const std::vector<ScaffoldConfig>& ordered,
                                const ExplorationConfig& exploration, const SpeedConfig& speeds, std::uint64_t seed) {
    if (ordered.empty()) throw ContractError("assemble_path needs at least one scaffold");
    const std::size_t count = ordered.size();
    std::vector<ExplorationPhase> phases(count);
    parallel_for(count, [&](std::size_t i) {
        phases[i] = exploration_phase(chain, ordered[i].q, exploration, mix_seed(seed, i, 1));
    });
    Eigen::Index total = 0;
    for (const auto& p : phases) total += 1 + p.length();
    ConfigPath path;
    path.q.resize(chain.size(), total);
    path.phase.reserve(static_cast<std::size_t>(total));
    path.speed_factor.reserve(static_cast<std::size_t>(total));
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(mix_seed(seed, i, 2));
        const double reach = rng.uniform(speeds.reaching_min, speeds.reaching_max);
        const double explore = rng.uniform(speeds.exploring_min, speeds.exploring_max);
        path.q.col(col++) = ordered[i].q;
        path.phase.push_back(PathPhase::scaffold);
        path.speed_factor.push_back(reach);
        path.q.middleCols(col, phases[i].length()) = phases[i].waypoints;
        col += phases[i].length();
        path.phase.insert(path.phase.end(), static_cast<std::size_t>(phases[i].length()), PathPhase::explore);
        path.speed_factor.insert(path.speed_factor.end(), static_cast<std::size_t>(phases[i].length()), explore);
    }
    return path;
}

struct LimopaConfig {
    WorkspaceSpec workspace;
    int scaffolds = 150;
    ExplorationConfig exploration;
    SpeedConfig speeds;
};

/// Full generator: sample, order, assemble. Pure function of (chain, config, seed).
inline ConfigPath generate_limo_path(const RobotChain& chain, const LimopaConfig& config, std::uint64_t seed,
                                     const FeasibilityPredicate& feasible = {}) {
    const auto scaffolds = sample_scaffolds(chain, config.workspace, config.scaffolds, mix_seed(seed, 0), feasible);
    return assemble_path(chain, order_scaffolds(scaffolds), config.exploration, config.speeds, mix_seed(seed, 1));
}

inline LimopaConfig limopa_config_from(const TextSection& s, LimopaConfig c = {}) {
    c.workspace.radius = s.get_double("workspace_radius", c.workspace.radius);
    c.workspace.front_upper_quadrant = s.get_bool("front_upper_quadrant", c.workspace.front_upper_quadrant);
    c.scaffolds = static_cast<int>(s.get_int("scaffolds", c.scaffolds));
    c.exploration.summands = static_cast<int>(s.get_int("summands", c.exploration.summands));
    c.exploration.amplitude_min_deg = s.get_double("amplitude_min_deg", c.exploration.amplitude_min_deg);
    c.exploration.amplitude_max_deg = s.get_double("amplitude_max_deg", c.exploration.amplitude_max_deg);
    c.exploration.frequency_max_hz = s.get_double("frequency_max_hz", c.exploration.frequency_max_hz);
    c.exploration.length_min = static_cast<int>(s.get_int("length_min", c.exploration.length_min));
    c.exploration.length_max = static_cast<int>(s.get_int("length_max", c.exploration.length_max));
    c.exploration.tick_hz = s.get_double("tick_hz", c.exploration.tick_hz);
    c.speeds.reaching_min = s.get_double("reaching_speed_min", c.speeds.reaching_min);
    c.speeds.reaching_max = s.get_double("reaching_speed_max", c.speeds.reaching_max);
    c.speeds.exploring_min = s.get_double("exploring_speed_min", c.speeds.exploring_min);
    c.speeds.exploring_max = s.get_double("exploring_speed_max", c.speeds.exploring_max);
    return c;
}

// ---------------------------------------------------------------------------
// Path files: CSV idx,phase,q1..qn,speed_factor

inline std::string path_to_csv(const ConfigPath& path) {
    std::ostringstream out;
    out << "idx,phase";
    for (int j = 0; j < path.joints(); ++j) out << ",q" << j + 1;
    out << ",speed_factor\n";
    for (int i = 0; i < path.size(); ++i) {
        out << i << ',' << phase_name(path.phase[static_cast<std::size_t>(i)]);
        for (int j = 0; j < path.joints(); ++j) out << ',' << format_double(path.q(j, i));
        out << ',' << format_double(path.speed_factor[static_cast<std::size_t>(i)]) << '\n';
    }
    return out.str();
}

inline void save_path(const std::string& file, const ConfigPath& path) { write_text_file(file, path_to_csv(path)); }

inline ConfigPath path_from_csv(const CsvTable& table) {
    int joints = 0;
    while (table.column_index("q" + std::to_string(joints + 1)) >= 0) ++joints;
    if (joints == 0) throw IoError(table.origin + ": path file has no q1 column");
    const int phase_col = table.require_column("phase");
    ConfigPath path;
    path.q.resize(joints, table.rows_count());
    for (int j = 0; j < joints; ++j) path.q.row(j) = table.numeric_column("q" + std::to_string(j + 1)).transpose();
    const Eigen::VectorXd speed = table.numeric_column("speed_factor");
    for (int i = 0; i < table.rows_count(); ++i) {
        const std::string& p = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(phase_col)];
        if (p == "scaf") {
            path.phase.push_back(PathPhase::scaffold);
        } else if (p == "explore") {
            path.phase.push_back(PathPhase::explore);
        } else {
            throw IoError(table.origin + ": row " + std::to_string(i + 1) + " has unknown phase '" + p + "'");
        }
        path.speed_factor.push_back(speed(i));
    }
    return path;
}

inline ConfigPath load_path(const std::string& file) { return path_from_csv(read_csv(file)); }

}  // namespace lidym
