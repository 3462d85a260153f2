#pragma once

/**
 * @file dynamics.hpp
 * @brief Recursive Newton-Euler inverse dynamics with viscous/Coulomb joint
 *        friction, and the regressor that is linear in the link parameters.
 *
 * Both compute
 *   tau = H(q) qdd + C(q, qd) qd + g(q) + F_v qd + F_c sign(qd)
 * but along different routes: rnea() propagates wrenches through the local
 * link frames, regressor() projects every link's parameter columns onto the
 * upstream joint axes in the base frame. Their agreement is the main
 * correctness check of this module.
 */

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "lidym/chain.hpp"
#include "lidym/errors.hpp"

namespace lidym {

/// sign with sign(0) = 0.
inline double signum(double x) { return (x > 0.0) - (x < 0.0); }

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d s;
    s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return s;
}

namespace detail {

inline void check_state(const RobotChain& chain, const JointState& s) {
    const int n = chain.size();
    if (s.q.size() != n || s.qd.size() != n || s.qdd.size() != n) {
        throw ContractError("joint state dimension does not match the chain");
    }
    if (!s.finite()) {
        throw InputDomainError("joint state must be finite");
    }
}

/// I * w expressed as L(w) * [Ixx Ixy Ixz Iyy Iyz Izz]^T.
inline Eigen::Matrix<double, 3, 6> inertia_product(const Eigen::Vector3d& w) {
    Eigen::Matrix<double, 3, 6> l;
    l << w.x(), w.y(), w.z(), 0, 0, 0,
         0, w.x(), 0, w.y(), w.z(), 0,
         0, 0, w.x(), 0, w.y(), w.z();
    return l;
}

}  // namespace detail

inline Eigen::VectorXd rnea(const RobotChain& chain, const Eigen::VectorXd& phi, const JointState& s) {
    check_parameter_dimension(chain, phi);
    detail::check_state(chain, s);
    const int n = chain.size();

    std::vector<Eigen::Matrix3d> rot(n);  // link i orientation in link i-1
    std::vector<Eigen::Vector3d> force(n), moment(n);

    Eigen::Vector3d w = Eigen::Vector3d::Zero();
    Eigen::Vector3d dw = Eigen::Vector3d::Zero();
    Eigen::Vector3d acc = -chain.gravity();  // gravity as fictitious base acceleration

    for (int i = 0; i < n; ++i) {
        const Joint& joint = chain.joint(i);
        rot[i] = joint.origin.rotation * joint_rotation(joint, s.q(i));
        const Eigen::Matrix3d rt = rot[i].transpose();
        const Eigen::Vector3d& p = joint.origin.translation;
        const Eigen::Vector3d& z = joint.axis;

        const Eigen::Vector3d acc_i = rt * (acc + dw.cross(p) + w.cross(w.cross(p)));
        const Eigen::Vector3d w_parent = rt * w;
        const Eigen::Vector3d w_i = w_parent + z * s.qd(i);
        const Eigen::Vector3d dw_i = rt * dw + w_parent.cross(z * s.qd(i)) + z * s.qdd(i);

        const auto block = phi.segment<kParamsPerLink>(kParamsPerLink * i);
        const double m = block(kMass);
        const Eigen::Vector3d mc = block.segment<3>(kFirstMomentX);
        const Eigen::Matrix3d inertia = origin_inertia(phi, i);

        force[i] = m * acc_i + dw_i.cross(mc) + w_i.cross(w_i.cross(mc));
        moment[i] = inertia * dw_i + w_i.cross(inertia * w_i) + mc.cross(acc_i);

        w = w_i;
        dw = dw_i;
        acc = acc_i;
    }

    Eigen::VectorXd tau(n);
    Eigen::Vector3d f_child = Eigen::Vector3d::Zero();
    Eigen::Vector3d n_child = Eigen::Vector3d::Zero();
    for (int i = n - 1; i >= 0; --i) {
        Eigen::Vector3d f = force[i];
        Eigen::Vector3d m = moment[i];
        if (i + 1 < n) {
            const Eigen::Vector3d f_in_i = rot[i + 1] * f_child;
            f += f_in_i;
            m += rot[i + 1] * n_child + chain.joint(i + 1).origin.translation.cross(f_in_i);
        }
        const auto block = phi.segment<kParamsPerLink>(kParamsPerLink * i);
        tau(i) = chain.joint(i).axis.dot(m) + block(kViscous) * s.qd(i) + block(kCoulomb) * signum(s.qd(i));
        f_child = f;
        n_child = m;
    }
    return tau;
}

/// Observation matrix K (n x 12n) with K * phi == rnea(chain, phi, s).
/// Columns per link: [m, mc_x, mc_y, mc_z, I_xx, I_xy, I_xz, I_yy, I_yz, I_zz, F_v, F_c].
inline Eigen::MatrixXd regressor(const RobotChain& chain, const JointState& s) {
    detail::check_state(chain, s);
    const int n = chain.size();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, kParamsPerLink * n);

    // Base-frame kinematics.
    std::vector<Eigen::Matrix3d> orient(n);
    std::vector<Eigen::Vector3d> origin(n), axis(n), w(n), dw(n), acc(n);
    Eigen::Matrix3d parent_orient = Eigen::Matrix3d::Identity();
    Eigen::Vector3d parent_origin = Eigen::Vector3d::Zero();
    Eigen::Vector3d parent_w = Eigen::Vector3d::Zero();
    Eigen::Vector3d parent_dw = Eigen::Vector3d::Zero();
    Eigen::Vector3d parent_acc = -chain.gravity();
    for (int i = 0; i < n; ++i) {
        const Joint& joint = chain.joint(i);
        const Eigen::Matrix3d joint_frame = parent_orient * joint.origin.rotation;
        origin[i] = parent_origin + parent_orient * joint.origin.translation;
        axis[i] = joint_frame * joint.axis;
        orient[i] = joint_frame * joint_rotation(joint, s.q(i));

        const Eigen::Vector3d lever = origin[i] - parent_origin;
        acc[i] = parent_acc + parent_dw.cross(lever) + parent_w.cross(parent_w.cross(lever));
        w[i] = parent_w + axis[i] * s.qd(i);
        dw[i] = parent_dw + parent_w.cross(axis[i]) * s.qd(i) + axis[i] * s.qdd(i);

        parent_orient = orient[i];
        parent_origin = origin[i];
        parent_w = w[i];
        parent_dw = dw[i];
        parent_acc = acc[i];
    }

    for (int i = 0; i < n; ++i) {
        const Eigen::Matrix3d rt = orient[i].transpose();
        const Eigen::Vector3d wl = rt * w[i];
        const Eigen::Vector3d dwl = rt * dw[i];
        const Eigen::Vector3d al = rt * acc[i];

        // Link wrench about its frame origin, local coordinates, per inertial parameter.
        Eigen::Matrix<double, 3, 10> f_local = Eigen::Matrix<double, 3, 10>::Zero();
        Eigen::Matrix<double, 3, 10> n_local = Eigen::Matrix<double, 3, 10>::Zero();
        f_local.col(0) = al;
        f_local.block<3, 3>(0, 1) = skew(dwl) + skew(wl) * skew(wl);
        n_local.block<3, 3>(0, 1) = -skew(al);
        n_local.block<3, 6>(0, 4) = detail::inertia_product(dwl) + skew(wl) * detail::inertia_product(wl);

        const Eigen::Matrix<double, 3, 10> f_world = orient[i] * f_local;
        const Eigen::Matrix<double, 3, 10> n_world = orient[i] * n_local;
        for (int j = 0; j <= i; ++j) {
            const Eigen::Vector3d lever = origin[i] - origin[j];
            const Eigen::Matrix<double, 3, 10> moment_j = n_world + skew(lever) * f_world;
            k.block<1, 10>(j, kParamsPerLink * i) = axis[j].transpose() * moment_j;
        }
        k(i, kParamsPerLink * i + kViscous) = s.qd(i);
        k(i, kParamsPerLink * i + kCoulomb) = signum(s.qd(i));
    }
    return k;
}

}  // namespace lidym
