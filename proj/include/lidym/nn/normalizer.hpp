#pragma once

#include <string>

#include <Eigen/Dense>

#include "lidym/errors.hpp"

namespace lidym::nn {

/// Per-feature affine standardization; rows are features, columns samples.
struct Normalizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    /// Features whose standard deviation falls below this keep their mean and get unit scale.
    static constexpr double kDegenerate = 1e-12;

    static Normalizer identity(Eigen::Index dim) {
        return Normalizer{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
    }

    static Normalizer fit(const Eigen::MatrixXd& samples) {
        if (samples.cols() == 0) {
            throw ContractError("normalizer fit needs at least one sample");
        }
        Normalizer n;
        n.mean = samples.rowwise().mean();
        const Eigen::MatrixXd centered = samples.colwise() - n.mean;
        n.stddev = (centered.array().square().rowwise().sum() / static_cast<double>(samples.cols())).sqrt();
        for (Eigen::Index i = 0; i < n.stddev.size(); ++i) {
            if (!(n.stddev(i) >= kDegenerate)) n.stddev(i) = 1.0;
        }
        return n;
    }

    Eigen::Index dim() const { return mean.size(); }

    Eigen::MatrixXd normalize(const Eigen::MatrixXd& x) const {
        check(x);
        return ((x.colwise() - mean).array().colwise() / stddev.array()).matrix();
    }

    Eigen::MatrixXd denormalize(const Eigen::MatrixXd& y) const {
        check(y);
        return ((y.array().colwise() * stddev.array()).matrix()).colwise() + mean;
    }

private:
    void check(const Eigen::MatrixXd& x) const {
        if (x.rows() != mean.size()) {
            throw ContractError("normalizer dimension " + std::to_string(mean.size()) + " does not match input rows " +
                                std::to_string(x.rows()));
        }
    }
};

}  // namespace lidym::nn
