#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lidym/random.hpp"

namespace lidym::nn {

/// Trainable tensor with its accumulated gradient. Biases are single-column matrices.
struct Parameter {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;

    Parameter() = default;
    Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Eigen::MatrixXd::Zero(rows, cols)), grad(Eigen::MatrixXd::Zero(rows, cols)) {}

    Eigen::Index size() const { return value.size(); }
};

using ParameterRefs = std::vector<Parameter*>;

/// Glorot/Xavier uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline void xavier_uniform(Parameter& p, Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        p.value.data()[i] = rng.uniform(-a, a);
    }
}

inline Eigen::Index count_parameters(const ParameterRefs& params) {
    Eigen::Index n = 0;
    for (const auto* p : params) n += p->size();
    return n;
}

inline void zero_grad(const ParameterRefs& params) {
    for (auto* p : params) p->grad.setZero();
}

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x) {
    return (1.0 + (-x.array()).exp()).inverse().matrix();
}

}  // namespace lidym::nn
