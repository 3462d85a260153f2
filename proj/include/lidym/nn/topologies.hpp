#pragma once

/**
 * @file topologies.hpp
 * @brief The four torque network topologies. Every topology maps a
 *        time-major input batch (features x (T B)) to normalized joint
 *        torques at the final step (joints x B).
 */

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lidym/nn/layers.hpp"

namespace lidym::nn {

/// Seven independent single-hidden-layer perceptrons, one per joint, stored as one stacked layer.
class Mlp7 {
public:
    struct Tape {
        Eigen::MatrixXd x;
        Eigen::MatrixXd pre;
        Eigen::MatrixXd act;
    };

    Mlp7() = default;
    Mlp7(Eigen::Index in, Eigen::Index hidden, Eigen::Index joints)
        : w1("mlp.hidden.weight", joints * hidden, in),
          b1("mlp.hidden.bias", joints * hidden, 1), w2("mlp.out.weight", joints, hidden), b2("mlp.out.bias", joints, 1),
          hidden_(hidden), joints_(joints) {}

    void init(Rng& rng) {
        xavier_uniform(w1, rng, w1.value.cols(), hidden_);
        xavier_uniform(w2, rng, hidden_, 1);
        b1.value.setZero();
        b2.value.setZero();
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int /*steps*/, Tape& tape) const {
        tape.x = x;
        tape.pre = w1.value * x;
        tape.pre.colwise() += b1.value.col(0);
        tape.act = tape.pre.cwiseMax(0.0);
        Eigen::MatrixXd y(joints_, x.cols());
        for (Eigen::Index j = 0; j < joints_; ++j) {
            y.row(j) = w2.value.row(j) * tape.act.middleRows(j * hidden_, hidden_);
        }
        y.colwise() += b2.value.col(0);
        return y;
    }

    void backward(const Tape& tape, const Eigen::MatrixXd& dy) {
        Eigen::MatrixXd dpre(tape.act.rows(), tape.act.cols());
        for (Eigen::Index j = 0; j < joints_; ++j) {
            const auto act = tape.act.middleRows(j * hidden_, hidden_);
            w2.grad.row(j) += dy.row(j) * act.transpose();
            dpre.middleRows(j * hidden_, hidden_).noalias() = w2.value.row(j).transpose() * dy.row(j);
        }
        b2.grad.col(0) += dy.rowwise().sum();
        dpre = (tape.pre.array() > 0.0).select(dpre, 0.0);
        w1.grad.noalias() += dpre * tape.x.transpose();
        b1.grad.col(0) += dpre.rowwise().sum();
    }

    void collect(ParameterRefs& out) {
        for (Parameter* p : {&w1, &b1, &w2, &b2}) out.push_back(p);
    }

    Parameter w1, b1, w2, b2;

private:
    Eigen::Index hidden_ = 0;
    Eigen::Index joints_ = 0;
};

/// Two stacked LSTM cells; the final hidden state of the second cell is the output.
class Lstm2 {
public:
    struct Tape {
        LstmTape first;
        LstmTape second;
    };

    Lstm2() = default;
    Lstm2(Eigen::Index in, Eigen::Index hidden, Eigen::Index joints)
        : cell1("lstm1", in, hidden), cell2("lstm2", hidden, joints) {}

    void init(Rng& rng) {
        cell1.init(rng);
        cell2.init(rng);
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int steps, Tape& tape) const {
        const Eigen::Index batch = x.cols() / steps;
        const Eigen::MatrixXd& h1 = cell1.forward(x, steps, tape.first);
        return cell2.forward(h1, steps, tape.second).rightCols(batch);
    }

    void backward(const Tape& tape, const Eigen::MatrixXd& dy) {
        Eigen::MatrixXd dh2 = Eigen::MatrixXd::Zero(dy.rows(), tape.second.h.cols());
        dh2.rightCols(dy.cols()) = dy;
        const Eigen::MatrixXd dh1 = cell2.backward(tape.second, dh2);
        cell1.backward(tape.first, dh1);
    }

    void collect(ParameterRefs& out) {
        cell1.collect(out);
        cell2.collect(out);
    }

    LstmCell cell1, cell2;
};

/// One LSTM cell followed by a linear layer on its final hidden state.
class LstmFcl {
public:
    struct Tape {
        LstmTape cell;
        Eigen::MatrixXd last;
    };

    LstmFcl() = default;
    LstmFcl(Eigen::Index in, Eigen::Index hidden, Eigen::Index joints)
        : cell("lstm", in, hidden), head("fc", hidden, joints) {}

    void init(Rng& rng) {
        cell.init(rng);
        head.init(rng);
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int steps, Tape& tape) const {
        const Eigen::Index batch = x.cols() / steps;
        tape.last = cell.forward(x, steps, tape.cell).rightCols(batch);
        return head.forward(tape.last);
    }

    void backward(const Tape& tape, const Eigen::MatrixXd& dy) {
        Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(cell.hidden(), tape.cell.h.cols());
        dh.rightCols(dy.cols()) = head.backward(tape.last, dy);
        cell.backward(tape.cell, dh);
    }

    void collect(ParameterRefs& out) {
        cell.collect(out);
        head.collect(out);
    }

    LstmCell cell;
    Dense head;
};

/// Sinusoidal positional encoding, d x T.
inline Eigen::MatrixXd positional_encoding(Eigen::Index d_model, int steps) {
    Eigen::MatrixXd pe(d_model, steps);
    for (int t = 0; t < steps; ++t) {
        for (Eigen::Index i = 0; i < d_model; ++i) {
            const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model));
            pe(i, t) = (i % 2 == 0) ? std::sin(t * rate) : std::cos(t * rate);
        }
    }
    return pe;
}

/// Encoder-only Transformer: input projection, positional encoding, encoder layers, final-step readout.
class TransformerEncoder {
public:
    struct Tape {
        int steps = 0;
        Eigen::MatrixXd x;  ///< input rearranged batch-major
        std::vector<EncoderTape> layers;
        Eigen::MatrixXd last;
    };

    TransformerEncoder() = default;
    TransformerEncoder(Eigen::Index in, Eigen::Index d_model, int heads, int layers, Eigen::Index ffn,
                       Eigen::Index joints, bool positional)
        : proj("embed", in, d_model), head("readout", d_model, joints), positional_(positional) {
        for (int l = 0; l < layers; ++l) {
            encoders.emplace_back("encoder" + std::to_string(l), d_model, heads, ffn);
        }
    }

    void init(Rng& rng) {
        proj.init(rng);
        for (auto& e : encoders) e.init(rng);
        head.init(rng);
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int steps, Tape& tape) const {
        const Eigen::Index batch = x.cols() / steps;
        tape.steps = steps;
        tape.x.resize(x.rows(), x.cols());
        for (int t = 0; t < steps; ++t) {
            for (Eigen::Index b = 0; b < batch; ++b) tape.x.col(b * steps + t) = x.col(t * batch + b);
        }
        Eigen::MatrixXd z = proj.forward(tape.x);
        if (positional_) {
            const Eigen::MatrixXd pe = positional_encoding(z.rows(), steps);
            for (Eigen::Index b = 0; b < batch; ++b) z.middleCols(b * steps, steps) += pe;
        }
        tape.layers.resize(encoders.size());
        for (std::size_t l = 0; l < encoders.size(); ++l) {
            const bool last_layer = l + 1 == encoders.size();
            z = encoders[l].forward(z, steps, last_layer, tape.layers[l]);
        }
        if (encoders.empty()) {
            tape.last.resize(z.rows(), batch);
            for (Eigen::Index b = 0; b < batch; ++b) tape.last.col(b) = z.col(b * steps + steps - 1);
        } else {
            tape.last = std::move(z);
        }
        return head.forward(tape.last);
    }

    void backward(const Tape& tape, const Eigen::MatrixXd& dy) {
        const int steps = tape.steps;
        const Eigen::Index batch = dy.cols();
        const Eigen::MatrixXd dlast = head.backward(tape.last, dy);
        Eigen::MatrixXd dz;
        if (encoders.empty()) {
            dz = Eigen::MatrixXd::Zero(dlast.rows(), batch * steps);
            for (Eigen::Index b = 0; b < batch; ++b) dz.col(b * steps + steps - 1) = dlast.col(b);
        } else {
            dz = dlast;
            for (std::size_t l = encoders.size(); l-- > 0;) {
                dz = encoders[l].backward(tape.layers[l], dz);
            }
        }
        proj.backward(tape.x, dz);
    }

    void collect(ParameterRefs& out) {
        proj.collect(out);
        for (auto& e : encoders) e.collect(out);
        head.collect(out);
    }

    bool positional() const { return positional_; }

    Dense proj;
    std::vector<EncoderLayer> encoders;
    Dense head;

private:
    bool positional_ = true;
};

}  // namespace lidym::nn
