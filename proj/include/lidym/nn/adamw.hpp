#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "lidym/errors.hpp"
#include "lidym/nn/parameter.hpp"

namespace lidym::nn {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

/// Adam with decoupled weight decay and bias-corrected moments.
class AdamW {
public:
    AdamW() = default;
    explicit AdamW(AdamWConfig config) : config_(config) {}

    AdamWConfig& config() { return config_; }
    const AdamWConfig& config() const { return config_; }
    long long steps() const { return step_; }

    /// Applies one update to every parameter from its accumulated gradient.
    void step(const ParameterRefs& params) {
        if (first_.empty()) {
            for (const auto* p : params) {
                first_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
                second_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
            }
        }
        if (first_.size() != params.size()) {
            throw ContractError("AdamW: parameter list changed between steps");
        }
        ++step_;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Parameter& p = *params[i];
            if (p.grad.rows() != first_[i].rows() || p.grad.cols() != first_[i].cols()) {
                throw ContractError("AdamW: shape mismatch for " + p.name);
            }
            first_[i] = config_.beta1 * first_[i] + (1.0 - config_.beta1) * p.grad;
            second_[i] = config_.beta2 * second_[i] + (1.0 - config_.beta2) * p.grad.cwiseAbs2();
            p.value -= config_.lr * config_.weight_decay * p.value;
            p.value.array() -= config_.lr * (first_[i].array() / c1) / ((second_[i].array() / c2).sqrt() + config_.epsilon);
        }
    }

private:
    AdamWConfig config_;
    std::vector<Eigen::MatrixXd> first_;
    std::vector<Eigen::MatrixXd> second_;
    long long step_ = 0;
};

}  // namespace lidym::nn
