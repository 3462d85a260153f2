#pragma once

/**
 * @file chain.hpp
 * @brief Serial revolute chain description, joint state, link parameter
 *        layout and forward kinematics.
 *
 * Frame convention: the frame of link i is obtained from the frame of link
 * i-1 (the base for i = 0) by the fixed joint origin transform followed by a
 * rotation of q_i about the joint axis. The end effector sits at a fixed tool
 * offset in the last link frame.
 */

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "lidym/errors.hpp"
#include "lidym/text_format.hpp"

namespace lidym {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

/// Rigid transform: x_parent = rotation * x_child + translation.
struct Frame {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Frame operator*(const Frame& child) const {
        return Frame{rotation * child.rotation, rotation * child.translation + translation};
    }

    Eigen::Vector3d apply(const Eigen::Vector3d& point) const { return rotation * point + translation; }

    static Frame from_rpy(const Eigen::Vector3d& xyz, const Eigen::Vector3d& rpy) {
        const Eigen::Matrix3d r = (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
                                   Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
                                   Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
                                      .toRotationMatrix();
        return Frame{r, xyz};
    }
};

struct Joint {
    std::string name;
    Frame origin;                               ///< parent link frame -> joint frame at q = 0
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();  ///< unit rotation axis in the joint frame
    double lower = -std::numbers::pi;           ///< [rad]
    double upper = std::numbers::pi;            ///< [rad]
    double velocity_limit = 1.0;                ///< [rad/s]
};

class RobotChain {
public:
    RobotChain() = default;

    RobotChain(std::vector<Joint> joints, Eigen::Vector3d gravity = Eigen::Vector3d(0, 0, -9.81),
               Eigen::Vector3d tool_offset = Eigen::Vector3d::Zero())
        : joints_(std::move(joints)), gravity_(gravity), tool_offset_(tool_offset) {
        validate();
    }

    int size() const { return static_cast<int>(joints_.size()); }
    const Joint& joint(int i) const { return joints_.at(static_cast<std::size_t>(i)); }
    const std::vector<Joint>& joints() const { return joints_; }
    const Eigen::Vector3d& gravity() const { return gravity_; }
    const Eigen::Vector3d& tool_offset() const { return tool_offset_; }

    Eigen::VectorXd lower_limits() const {
        Eigen::VectorXd out(size());
        for (int i = 0; i < size(); ++i) out(i) = joints_[i].lower;
        return out;
    }
    Eigen::VectorXd upper_limits() const {
        Eigen::VectorXd out(size());
        for (int i = 0; i < size(); ++i) out(i) = joints_[i].upper;
        return out;
    }
    Eigen::VectorXd velocity_limits() const {
        Eigen::VectorXd out(size());
        for (int i = 0; i < size(); ++i) out(i) = joints_[i].velocity_limit;
        return out;
    }

    bool within_limits(const Eigen::VectorXd& q, double tolerance = 0.0) const {
        for (int i = 0; i < size(); ++i) {
            if (q(i) < joints_[i].lower - tolerance || q(i) > joints_[i].upper + tolerance) {
                return false;
            }
        }
        return true;
    }

private:
    void validate() const {
        if (joints_.empty()) {
            throw ContractError("robot chain needs at least one joint");
        }
        for (const auto& j : joints_) {
            if (std::abs(j.axis.norm() - 1.0) > 1e-12) {
                throw ContractError("joint '" + j.name + "' axis is not unit length");
            }
            if (!(j.lower < j.upper)) {
                throw ContractError("joint '" + j.name + "' requires lower < upper position limit");
            }
            if (!(j.velocity_limit > 0.0)) {
                throw ContractError("joint '" + j.name + "' requires a positive velocity limit");
            }
        }
        if (!gravity_.allFinite()) {
            throw ContractError("gravity must be finite");
        }
    }

    std::vector<Joint> joints_;
    Eigen::Vector3d gravity_ = Eigen::Vector3d(0, 0, -9.81);
    Eigen::Vector3d tool_offset_ = Eigen::Vector3d::Zero();
};

struct JointState {
    Eigen::VectorXd q;
    Eigen::VectorXd qd;
    Eigen::VectorXd qdd;

    static JointState zeros(int n) {
        return JointState{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    }

    bool finite() const { return q.allFinite() && qd.allFinite() && qdd.allFinite(); }
};

// ---------------------------------------------------------------------------
// Link parameters: 12 per link, concatenated in link order.

constexpr int kParamsPerLink = 12;

enum LinkParam : int {
    kMass = 0,
    kFirstMomentX,
    kFirstMomentY,
    kFirstMomentZ,
    kInertiaXX,
    kInertiaXY,
    kInertiaXZ,
    kInertiaYY,
    kInertiaYZ,
    kInertiaZZ,
    kViscous,
    kCoulomb,
};

inline const char* link_param_name(int index) {
    static const char* names[kParamsPerLink] = {"m",   "mc_x", "mc_y", "mc_z", "I_xx", "I_xy",
                                                "I_xz", "I_yy", "I_yz", "I_zz", "F_v",  "F_c"};
    return names[index % kParamsPerLink];
}

/// Physical description of one link, convertible to the 12-entry parameter block.
struct LinkInertia {
    double mass = 0.0;
    Eigen::Vector3d com = Eigen::Vector3d::Zero();          ///< in link frame [m]
    Eigen::Matrix3d inertia_com = Eigen::Matrix3d::Zero();  ///< about the CoM [kg m^2]
    double viscous = 0.0;
    double coulomb = 0.0;

    /// Parameter block with inertia shifted to the link frame origin.
    Eigen::Matrix<double, kParamsPerLink, 1> to_params() const {
        const Eigen::Matrix3d shift = mass * (com.squaredNorm() * Eigen::Matrix3d::Identity() - com * com.transpose());
        const Eigen::Matrix3d io = inertia_com + shift;
        Eigen::Matrix<double, kParamsPerLink, 1> p;
        p << mass, mass * com.x(), mass * com.y(), mass * com.z(), io(0, 0), io(0, 1), io(0, 2), io(1, 1), io(1, 2),
            io(2, 2), viscous, coulomb;
        return p;
    }
};

inline Eigen::Matrix3d origin_inertia(const Eigen::VectorXd& phi, int link) {
    const auto p = phi.segment<kParamsPerLink>(kParamsPerLink * link);
    Eigen::Matrix3d inertia;
    inertia << p(kInertiaXX), p(kInertiaXY), p(kInertiaXZ), p(kInertiaXY), p(kInertiaYY), p(kInertiaYZ),
        p(kInertiaXZ), p(kInertiaYZ), p(kInertiaZZ);
    return inertia;
}

/// Ground-truth plausibility: positive mass and a positive semidefinite inertia about the CoM.
inline bool physically_consistent(const Eigen::VectorXd& phi, double tolerance = 1e-12) {
    if (phi.size() % kParamsPerLink != 0) {
        return false;
    }
    for (int link = 0; link < phi.size() / kParamsPerLink; ++link) {
        const auto p = phi.segment<kParamsPerLink>(kParamsPerLink * link);
        const double m = p(kMass);
        if (!(m > 0.0)) {
            return false;
        }
        const Eigen::Vector3d c = p.segment<3>(kFirstMomentX) / m;
        const Eigen::Matrix3d at_com =
            origin_inertia(phi, link) - m * (c.squaredNorm() * Eigen::Matrix3d::Identity() - c * c.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(at_com);
        if (eig.eigenvalues().minCoeff() < -tolerance) {
            return false;
        }
    }
    return true;
}

inline void check_parameter_dimension(const RobotChain& chain, const Eigen::VectorXd& phi) {
    if (phi.size() != kParamsPerLink * chain.size()) {
        throw ContractError("parameter vector has " + std::to_string(phi.size()) + " entries, expected " +
                            std::to_string(kParamsPerLink * chain.size()));
    }
}

// ---------------------------------------------------------------------------
// Forward kinematics

struct KinematicsResult {
    std::vector<Frame> links;  ///< base-frame pose of each link frame
    Eigen::Vector3d end_effector = Eigen::Vector3d::Zero();
};

inline Eigen::Matrix3d joint_rotation(const Joint& joint, double angle) {
    return Eigen::AngleAxisd(angle, joint.axis).toRotationMatrix();
}

inline KinematicsResult forward_kinematics(const RobotChain& chain, const Eigen::VectorXd& q) {
    if (q.size() != chain.size()) {
        throw ContractError("forward_kinematics: q has wrong dimension");
    }
    if (!q.allFinite()) {
        throw InputDomainError("forward_kinematics: q must be finite");
    }
    KinematicsResult out;
    out.links.reserve(static_cast<std::size_t>(chain.size()));
    Frame pose;
    for (int i = 0; i < chain.size(); ++i) {
        const Joint& joint = chain.joint(i);
        pose = pose * joint.origin;
        pose.rotation = pose.rotation * joint_rotation(joint, q(i));
        out.links.push_back(pose);
    }
    out.end_effector = pose.apply(chain.tool_offset());
    return out;
}

// ---------------------------------------------------------------------------
// Reference 7-DOF arm (iiwa-like geometry) and its plant parameters.

inline RobotChain reference_chain() {
    struct Row {
        double z;
        Eigen::Vector3d axis;
        double limit_deg;
        double velocity_deg;
    };
    const Row rows[7] = {
        {0.1575, Eigen::Vector3d::UnitZ(), 170, 85},  {0.2025, Eigen::Vector3d::UnitY(), 120, 85},
        {0.2045, Eigen::Vector3d::UnitZ(), 170, 100}, {0.2155, -Eigen::Vector3d::UnitY(), 120, 75},
        {0.1845, Eigen::Vector3d::UnitZ(), 170, 130}, {0.2155, Eigen::Vector3d::UnitY(), 120, 135},
        {0.0810, Eigen::Vector3d::UnitZ(), 175, 135},
    };
    std::vector<Joint> joints;
    for (int i = 0; i < 7; ++i) {
        Joint j;
        j.name = "A" + std::to_string(i + 1);
        j.origin.translation = Eigen::Vector3d(0, 0, rows[i].z);
        j.axis = rows[i].axis;
        j.lower = -rows[i].limit_deg * kDegToRad;
        j.upper = rows[i].limit_deg * kDegToRad;
        j.velocity_limit = rows[i].velocity_deg * kDegToRad;
        joints.push_back(j);
    }
    return RobotChain(std::move(joints), Eigen::Vector3d(0, 0, -9.81), Eigen::Vector3d(0, 0, 0.126));
}

inline std::vector<LinkInertia> reference_links() {
    auto diag = [](double a, double b, double c) { return Eigen::Vector3d(a, b, c).asDiagonal().toDenseMatrix(); };
    std::vector<LinkInertia> links(7);
    links[0] = {4.0, {0.0, -0.03, 0.12}, diag(0.10, 0.09, 0.02), 0.80, 0.60};
    links[1] = {4.0, {0.0003, 0.059, 0.042}, diag(0.05, 0.018, 0.044), 0.80, 0.60};
    links[2] = {3.0, {0.0, 0.03, 0.13}, diag(0.08, 0.075, 0.01), 0.60, 0.50};
    links[3] = {2.7, {0.0, 0.067, 0.034}, diag(0.03, 0.01, 0.029), 0.60, 0.50};
    links[4] = {1.7, {0.0001, 0.021, 0.076}, diag(0.02, 0.018, 0.005), 0.40, 0.30};
    links[5] = {1.8, {0.0, 0.0006, 0.0004}, diag(0.005, 0.0036, 0.0047), 0.30, 0.30};
    links[6] = {0.3, {0.0, 0.0, 0.02}, diag(0.001, 0.001, 0.001), 0.20, 0.20};
    return links;
}

inline Eigen::VectorXd stack_parameters(const std::vector<LinkInertia>& links) {
    Eigen::VectorXd phi(kParamsPerLink * static_cast<Eigen::Index>(links.size()));
    for (std::size_t i = 0; i < links.size(); ++i) {
        phi.segment<kParamsPerLink>(kParamsPerLink * static_cast<Eigen::Index>(i)) = links[i].to_params();
    }
    return phi;
}

inline Eigen::VectorXd reference_parameters() { return stack_parameters(reference_links()); }

// ---------------------------------------------------------------------------
// Robot description and parameter files (grammar in docs/formats.md)

inline Eigen::Vector3d parse_vector3(const TextSection& section, std::string_view key, Eigen::Vector3d fallback) {
    auto value = section.find(key);
    if (!value) {
        return fallback;
    }
    const auto v = parse_doubles(*value);
    if (v.size() != 3) {
        throw IoError("key '" + std::string(key) + "' in [" + section.name + "] needs 3 numbers");
    }
    return Eigen::Vector3d(v[0], v[1], v[2]);
}

inline RobotChain robot_from_document(const TextDocument& doc) {
    Eigen::Vector3d gravity(0, 0, -9.81);
    Eigen::Vector3d tool = Eigen::Vector3d::Zero();
    if (const auto* g = doc.find("gravity")) {
        gravity = parse_vector3(*g, "vector", gravity);
    }
    if (const auto* t = doc.find("tool")) {
        tool = parse_vector3(*t, "xyz", tool);
    }
    std::vector<Joint> joints;
    for (const auto* section : doc.find_all("joint")) {
        Joint j;
        j.name = section->find("name").value_or("J" + std::to_string(joints.size() + 1));
        j.origin = Frame::from_rpy(parse_vector3(*section, "xyz", Eigen::Vector3d::Zero()),
                                   parse_vector3(*section, "rpy", Eigen::Vector3d::Zero()));
        j.axis = parse_vector3(*section, "axis", Eigen::Vector3d::UnitZ());
        const auto limits = section->get_doubles("limits");
        if (limits.size() != 2) {
            throw IoError("joint '" + j.name + "': 'limits' needs lower and upper");
        }
        j.lower = limits[0];
        j.upper = limits[1];
        j.velocity_limit = section->get_double("velocity_limit");
        joints.push_back(j);
    }
    try {
        return RobotChain(std::move(joints), gravity, tool);
    } catch (const ContractError& e) {
        throw IoError(std::string("invalid robot description: ") + e.what());
    }
}

inline RobotChain load_robot(const std::string& path) { return robot_from_document(TextDocument::load(path)); }

inline void append_robot(TextDocument& doc, const RobotChain& chain) {
    doc.add("gravity").set("vector", join_doubles(chain.gravity()));
    doc.add("tool").set("xyz", join_doubles(chain.tool_offset()));
    for (const auto& j : chain.joints()) {
        auto& s = doc.add("joint");
        s.set("name", j.name);
        s.set("xyz", join_doubles(j.origin.translation));
        const Eigen::Vector3d ypr = j.origin.rotation.eulerAngles(2, 1, 0);
        // eulerAngles may pick an equivalent branch; the rotation round-trips either way.
        s.set("rpy", join_doubles(Eigen::Vector3d(ypr(2), ypr(1), ypr(0))));
        s.set("axis", join_doubles(j.axis));
        s.set("limits", format_double(j.lower) + " " + format_double(j.upper));
        s.set("velocity_limit", format_double(j.velocity_limit));
    }
}

inline void save_robot(const std::string& path, const RobotChain& chain) {
    TextDocument doc;
    append_robot(doc, chain);
    doc.save(path);
}

/// Parameter file: one line of 12 numbers per link, '#' comments.
inline Eigen::VectorXd load_parameters(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    std::vector<double> values;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        const auto row = parse_doubles(line);
        if (row.empty()) {
            continue;
        }
        if (row.size() != kParamsPerLink) {
            throw IoError(path + ":" + std::to_string(line_no) + ": expected 12 parameters per link");
        }
        values.insert(values.end(), row.begin(), row.end());
    }
    return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline void save_parameters(const std::string& path, const Eigen::VectorXd& phi) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write '" + path + "'");
    }
    out << "# m mc_x mc_y mc_z I_xx I_xy I_xz I_yy I_yz I_zz F_v F_c (inertia about link frame origin)\n";
    for (Eigen::Index link = 0; link < phi.size() / kParamsPerLink; ++link) {
        out << join_doubles(phi.segment<kParamsPerLink>(kParamsPerLink * link)) << "\n";
    }
}

}  // namespace lidym
