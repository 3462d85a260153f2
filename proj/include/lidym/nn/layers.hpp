#pragma once

/**
 * @file layers.hpp
 * @brief Building blocks with hand-derived adjoints: dense layer, LSTM cell,
 *        layer normalization and a post-norm Transformer encoder layer.
 *
 * Activations are column-major batches: one column per sample. Sequence
 * inputs of the LSTM are time-major (column t * B + b); the encoder layer
 * works batch-major (column b * T + t) so each sequence is contiguous.
 */

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lidym/nn/parameter.hpp"

namespace lidym::nn {

class Dense {
public:
    Dense() = default;
    Dense(const std::string& name, Eigen::Index in, Eigen::Index out)
        : w(name + ".weight", out, in), b(name + ".bias", out, 1) {}

    void init(Rng& rng) {
        xavier_uniform(w, rng, w.value.cols(), w.value.rows());
        b.value.setZero();
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd y = w.value * x;
        y.colwise() += b.value.col(0);
        return y;
    }

    /// Accumulates parameter gradients and returns dL/dx.
    Eigen::MatrixXd backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dy) {
        w.grad.noalias() += dy * x.transpose();
        b.grad.col(0) += dy.rowwise().sum();
        return w.value.transpose() * dy;
    }

    void collect(ParameterRefs& out) {
        out.push_back(&w);
        out.push_back(&b);
    }

    Eigen::Index inputs() const { return w.value.cols(); }
    Eigen::Index outputs() const { return w.value.rows(); }

    Parameter w;
    Parameter b;
};

// ---------------------------------------------------------------------------

struct LstmTape {
    int steps = 0;
    Eigen::MatrixXd x;                        ///< input, in x (T B)
    Eigen::MatrixXd i, f, g, o, c, tanh_c;    ///< H x (T B)
    Eigen::MatrixXd h;                        ///< H x (T B)
};

/// LSTM cell with forget gate; gate rows ordered input, forget, cell, output.
class LstmCell {
public:
    LstmCell() = default;
    LstmCell(const std::string& name, Eigen::Index in, Eigen::Index hidden)
        : w(name + ".w", 4 * hidden, in), u(name + ".u", 4 * hidden, hidden), b(name + ".b", 4 * hidden, 1) {}

    Eigen::Index hidden() const { return u.value.cols(); }

    void init(Rng& rng) {
        xavier_uniform(w, rng, w.value.cols(), w.value.rows());
        xavier_uniform(u, rng, u.value.cols(), u.value.rows());
        b.value.setZero();
    }

    /// Hidden states of every step, H x (T B), starting from zero state.
    const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x, int steps, LstmTape& tape) const {
        const Eigen::Index hd = hidden();
        const Eigen::Index batch = x.cols() / steps;
        tape.steps = steps;
        tape.x = x;
        Eigen::MatrixXd pre = w.value * x;
        pre.colwise() += b.value.col(0);
        for (auto* m : {&tape.i, &tape.f, &tape.g, &tape.o, &tape.c, &tape.tanh_c, &tape.h}) {
            m->resize(hd, x.cols());
        }
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hd, batch);
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(hd, batch);
        for (int t = 0; t < steps; ++t) {
            const Eigen::Index col = t * batch;
            Eigen::MatrixXd a = pre.middleCols(col, batch);
            a.noalias() += u.value * h;
            const Eigen::MatrixXd gi = sigmoid(a.topRows(hd));
            const Eigen::MatrixXd gf = sigmoid(a.middleRows(hd, hd));
            const Eigen::MatrixXd gg = a.middleRows(2 * hd, hd).array().tanh().matrix();
            const Eigen::MatrixXd go = sigmoid(a.bottomRows(hd));
            c = (gf.array() * c.array() + gi.array() * gg.array()).matrix();
            const Eigen::MatrixXd tc = c.array().tanh().matrix();
            h = (go.array() * tc.array()).matrix();
            tape.i.middleCols(col, batch) = gi;
            tape.f.middleCols(col, batch) = gf;
            tape.g.middleCols(col, batch) = gg;
            tape.o.middleCols(col, batch) = go;
            tape.c.middleCols(col, batch) = c;
            tape.tanh_c.middleCols(col, batch) = tc;
            tape.h.middleCols(col, batch) = h;
        }
        return tape.h;
    }

    /// Backpropagation through time; dh holds dL/dh_t for every step. Returns dL/dx.
    Eigen::MatrixXd backward(const LstmTape& tape, const Eigen::MatrixXd& dh) {
        const Eigen::Index hd = hidden();
        const int steps = tape.steps;
        const Eigen::Index batch = tape.x.cols() / steps;
        Eigen::MatrixXd da(4 * hd, tape.x.cols());
        Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(hd, batch);
        Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(hd, batch);
        for (int t = steps - 1; t >= 0; --t) {
            const Eigen::Index col = t * batch;
            const auto gi = tape.i.middleCols(col, batch).array();
            const auto gf = tape.f.middleCols(col, batch).array();
            const auto gg = tape.g.middleCols(col, batch).array();
            const auto go = tape.o.middleCols(col, batch).array();
            const auto tc = tape.tanh_c.middleCols(col, batch).array();
            const Eigen::ArrayXXd dht = (dh.middleCols(col, batch) + dh_next).array();
            const Eigen::ArrayXXd dc = dht * go * (1.0 - tc.square()) + dc_next.array();
            const Eigen::ArrayXXd c_prev = t > 0 ? Eigen::ArrayXXd(tape.c.middleCols(col - batch, batch).array())
                                                 : Eigen::ArrayXXd::Zero(hd, batch);
            da.block(0, col, hd, batch) = (dc * gg * gi * (1.0 - gi)).matrix();
            da.block(hd, col, hd, batch) = (dc * c_prev * gf * (1.0 - gf)).matrix();
            da.block(2 * hd, col, hd, batch) = (dc * gi * (1.0 - gg.square())).matrix();
            da.block(3 * hd, col, hd, batch) = (dht * tc * go * (1.0 - go)).matrix();
            dc_next = (dc * gf).matrix();
            dh_next.noalias() = u.value.transpose() * da.middleCols(col, batch);
        }
        if (steps > 1) {
            const Eigen::Index later = (steps - 1) * batch;
            u.grad.noalias() += da.rightCols(later) * tape.h.leftCols(later).transpose();
        }
        w.grad.noalias() += da * tape.x.transpose();
        b.grad.col(0) += da.rowwise().sum();
        return w.value.transpose() * da;
    }

    void collect(ParameterRefs& out) {
        out.push_back(&w);
        out.push_back(&u);
        out.push_back(&b);
    }

    Parameter w;
    Parameter u;
    Parameter b;
};

// ---------------------------------------------------------------------------

struct LayerNormTape {
    Eigen::MatrixXd xhat;
    Eigen::RowVectorXd inv_std;
};

/// Normalizes each column over its features, then applies gain and bias.
class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(const std::string& name, Eigen::Index dim) : gain(name + ".gain", dim, 1), bias(name + ".bias", dim, 1) {
        gain.value.setOnes();
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, LayerNormTape& tape) const {
        const double d = static_cast<double>(x.rows());
        const Eigen::RowVectorXd mean = x.colwise().sum() / d;
        Eigen::MatrixXd centered = x.rowwise() - mean;
        const Eigen::RowVectorXd var = centered.array().square().colwise().sum() / d;
        tape.inv_std = (var.array() + kEpsilon).rsqrt();
        tape.xhat = centered.array().rowwise() * tape.inv_std.array();
        Eigen::MatrixXd y = tape.xhat.array().colwise() * gain.value.col(0).array();
        y.colwise() += bias.value.col(0);
        return y;
    }

    Eigen::MatrixXd backward(const LayerNormTape& tape, const Eigen::MatrixXd& dy) {
        gain.grad.col(0) += (dy.array() * tape.xhat.array()).rowwise().sum().matrix();
        bias.grad.col(0) += dy.rowwise().sum();
        const double d = static_cast<double>(dy.rows());
        const Eigen::ArrayXXd dxhat = dy.array().colwise() * gain.value.col(0).array();
        const Eigen::RowVectorXd mean_d = dxhat.colwise().sum().matrix() / d;
        const Eigen::RowVectorXd mean_dx = (dxhat * tape.xhat.array()).colwise().sum().matrix() / d;
        Eigen::ArrayXXd dx = dxhat.rowwise() - mean_d.array();
        dx -= tape.xhat.array().rowwise() * mean_dx.array();
        return (dx.rowwise() * tape.inv_std.array()).matrix();
    }

    void collect(ParameterRefs& out) {
        out.push_back(&gain);
        out.push_back(&bias);
    }

    static constexpr double kEpsilon = 1e-5;

    Parameter gain;
    Parameter bias;
};

// ---------------------------------------------------------------------------

struct EncoderTape {
    int steps = 0;
    int queries = 0;         ///< query positions per sequence (T, or 1 for the last step only)
    Eigen::MatrixXd x, xq;   ///< layer input (all positions) and its query columns
    Eigen::MatrixXd q, k, v, attended;
    std::vector<Eigen::MatrixXd> probs;  ///< softmax weights per (sequence, head), T x queries
    Eigen::MatrixXd y1, f1;
    LayerNormTape ln1, ln2;
};

/**
 * Post-norm encoder layer:
 *   y1 = LN(x + MHA(x)),  y = LN(y1 + W2 relu(W1 y1)).
 * With last_only the queries (and everything after attention) are restricted
 * to the final step of each sequence.
 */
class EncoderLayer {
public:
    EncoderLayer() = default;
    EncoderLayer(const std::string& name, Eigen::Index d_model, int heads, Eigen::Index ffn)
        : wq(name + ".attn.q", d_model, d_model), wk(name + ".attn.k", d_model, d_model),
          wv(name + ".attn.v", d_model, d_model), wo(name + ".attn.out", d_model, d_model),
          ff1(name + ".ffn.1", d_model, ffn), ff2(name + ".ffn.2", ffn, d_model), ln1(name + ".norm1", d_model),
          ln2(name + ".norm2", d_model), heads_(heads) {}

    void init(Rng& rng) {
        for (Dense* d : {&wq, &wk, &wv, &wo, &ff1, &ff2}) d->init(rng);
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int steps, bool last_only, EncoderTape& tape) const {
        const Eigen::Index dm = x.rows();
        const Eigen::Index batch = x.cols() / steps;
        const Eigen::Index dh = dm / heads_;
        const int nq = last_only ? 1 : steps;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        tape.steps = steps;
        tape.queries = nq;
        tape.x = x;
        if (last_only) {
            tape.xq.resize(dm, batch);
            for (Eigen::Index b = 0; b < batch; ++b) tape.xq.col(b) = x.col(b * steps + steps - 1);
        } else {
            tape.xq = x;
        }
        tape.q = wq.forward(tape.xq);
        tape.k = wk.forward(x);
        tape.v = wv.forward(x);
        tape.attended.resize(dm, batch * nq);
        tape.probs.assign(static_cast<std::size_t>(batch * heads_), Eigen::MatrixXd());
        for (Eigen::Index b = 0; b < batch; ++b) {
            for (int h = 0; h < heads_; ++h) {
                const auto qh = tape.q.block(h * dh, b * nq, dh, nq);
                const auto kh = tape.k.block(h * dh, b * steps, dh, steps);
                const auto vh = tape.v.block(h * dh, b * steps, dh, steps);
                Eigen::MatrixXd s = (kh.transpose() * qh) * scale;  // T x nq
                for (Eigen::Index c = 0; c < s.cols(); ++c) {
                    const double m = s.col(c).maxCoeff();
                    s.col(c) = (s.col(c).array() - m).exp().matrix();
                    s.col(c) /= s.col(c).sum();
                }
                tape.attended.block(h * dh, b * nq, dh, nq).noalias() = vh * s;
                tape.probs[static_cast<std::size_t>(b * heads_ + h)] = std::move(s);
            }
        }
        const Eigen::MatrixXd r1 = tape.xq + wo.forward(tape.attended);
        tape.y1 = ln1.forward(r1, tape.ln1);
        tape.f1 = ff1.forward(tape.y1).cwiseMax(0.0);
        const Eigen::MatrixXd r2 = tape.y1 + ff2.forward(tape.f1);
        return ln2.forward(r2, tape.ln2);
    }

    /// Returns dL/dx for all positions of the layer input.
    Eigen::MatrixXd backward(const EncoderTape& tape, const Eigen::MatrixXd& dy) {
        const int steps = tape.steps;
        const int nq = tape.queries;
        const Eigen::Index dm = tape.x.rows();
        const Eigen::Index batch = tape.x.cols() / steps;
        const Eigen::Index dh = dm / heads_;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

        const Eigen::MatrixXd dr2 = ln2.backward(tape.ln2, dy);
        Eigen::MatrixXd df1 = ff2.backward(tape.f1, dr2);
        df1 = (tape.f1.array() > 0.0).select(df1, 0.0);
        const Eigen::MatrixXd dy1 = dr2 + ff1.backward(tape.y1, df1);
        const Eigen::MatrixXd dr1 = ln1.backward(tape.ln1, dy1);
        const Eigen::MatrixXd dattended = wo.backward(tape.attended, dr1);

        Eigen::MatrixXd dq(dm, batch * nq), dk(dm, batch * steps), dv(dm, batch * steps);
        for (Eigen::Index b = 0; b < batch; ++b) {
            for (int h = 0; h < heads_; ++h) {
                const Eigen::MatrixXd& p = tape.probs[static_cast<std::size_t>(b * heads_ + h)];
                const auto qh = tape.q.block(h * dh, b * nq, dh, nq);
                const auto kh = tape.k.block(h * dh, b * steps, dh, steps);
                const auto vh = tape.v.block(h * dh, b * steps, dh, steps);
                const auto doh = dattended.block(h * dh, b * nq, dh, nq);
                dv.block(h * dh, b * steps, dh, steps).noalias() = doh * p.transpose();
                const Eigen::MatrixXd dp = vh.transpose() * doh;  // T x nq
                Eigen::MatrixXd ds = p.cwiseProduct(dp);
                const Eigen::RowVectorXd col_sum = ds.colwise().sum();
                ds -= p * col_sum.asDiagonal();
                ds *= scale;
                dq.block(h * dh, b * nq, dh, nq).noalias() = kh * ds;
                dk.block(h * dh, b * steps, dh, steps).noalias() = qh * ds.transpose();
            }
        }
        Eigen::MatrixXd dxq = dr1 + wq.backward(tape.xq, dq);
        Eigen::MatrixXd dx = wk.backward(tape.x, dk) + wv.backward(tape.x, dv);
        if (nq == 1) {
            for (Eigen::Index b = 0; b < batch; ++b) dx.col(b * steps + steps - 1) += dxq.col(b);
        } else {
            dx += dxq;
        }
        return dx;
    }

    void collect(ParameterRefs& out) {
        for (Dense* d : {&wq, &wk, &wv, &wo}) d->collect(out);
        ln1.collect(out);
        ff1.collect(out);
        ff2.collect(out);
        ln2.collect(out);
    }

    Dense wq, wk, wv, wo, ff1, ff2;
    LayerNorm ln1, ln2;

private:
    int heads_ = 1;
};

}  // namespace lidym::nn
