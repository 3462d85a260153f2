#pragma once

/**
 * @file network.hpp
 * @brief Network specification, construction, normalized forward pass,
 *        torque-space MSE loss with gradients, and checkpoint files.
 *
 * Windows are passed time-major: a batch of B windows of length T is a
 * features x (T B) matrix whose column t * B + b holds step t of window b.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "lidym/errors.hpp"
#include "lidym/nn/normalizer.hpp"
#include "lidym/nn/topologies.hpp"
#include "lidym/text_format.hpp"

namespace lidym::nn {

enum class Topology { mlp7, lstm2, lstm_fcl, transformer };

inline std::string to_string(Topology t) {
    switch (t) {
        case Topology::mlp7: return "mlp7";
        case Topology::lstm2: return "lstm2";
        case Topology::lstm_fcl: return "lstm_fcl";
        case Topology::transformer: return "transformer";
    }
    return "unknown";
}

inline Topology parse_topology(const std::string& name) {
    if (name == "mlp7" || name == "MLP-7") return Topology::mlp7;
    if (name == "lstm2" || name == "LSTM-2") return Topology::lstm2;
    if (name == "lstm_fcl" || name == "LSTM-FCL") return Topology::lstm_fcl;
    if (name == "transformer" || name == "Transformer") return Topology::transformer;
    throw InputDomainError("unknown network topology '" + name + "'");
}

/// Feature groups per joint, in input order: q, q̇, q̈, then r and τ_RBD when enabled.
struct NetworkSpec {
    Topology topology = Topology::mlp7;
    int steps = 1;
    bool use_r = true;
    bool use_tau_rbd = true;
    bool hybrid_output_add = true;
    int joints = 7;
    int mlp_hidden = 100;
    int lstm_hidden = 35;
    int d_model = 64;
    int heads = 4;
    int layers = 2;
    int ffn = 128;
    bool positional_encoding = true;
    std::uint64_t seed = 0;

    int feature_groups() const { return 3 + (use_r ? 1 : 0) + (use_tau_rbd ? 1 : 0); }
    int input_dim() const { return joints * feature_groups(); }
    bool sequence() const { return topology != Topology::mlp7; }

    void validate() const {
        if (joints < 1) throw ContractError("network needs at least one joint");
        if (topology == Topology::mlp7 && steps != 1) {
            throw ContractError("MLP-7 requires window length 1, got " + std::to_string(steps));
        }
        if (topology != Topology::mlp7 && steps < 2) {
            throw ContractError(to_string(topology) + " requires window length >= 2, got " + std::to_string(steps));
        }
        if (mlp_hidden < 1 || lstm_hidden < 1 || d_model < 1 || heads < 1 || layers < 0 || ffn < 1) {
            throw ContractError("network widths must be positive");
        }
        if (topology == Topology::transformer && d_model % heads != 0) {
            throw ContractError("transformer d_model must be divisible by the head count");
        }
    }

    /// Variant name such as "LSTM-FCL 100 with tau_RBD, r".
    std::string label() const {
        static const char* names[] = {"MLP-7", "LSTM-2", "LSTM-FCL", "Transformer"};
        std::string s = names[static_cast<int>(topology)];
        if (sequence()) s += " " + std::to_string(steps);
        if (use_tau_rbd || use_r) {
            s += " with";
            if (use_tau_rbd) s += " tau_RBD";
            if (use_tau_rbd && use_r) s += ",";
            if (use_r) s += " r";
        }
        if (hybrid_output_add != use_tau_rbd) s += hybrid_output_add ? " (output add)" : " (no output add)";
        return s;
    }
};

class Network {
public:
    using Model = std::variant<Mlp7, Lstm2, LstmFcl, TransformerEncoder>;

    Network() = default;

    /// Builds the topology and initializes it deterministically from spec.seed.
    explicit Network(const NetworkSpec& spec) : spec_(spec) {
        spec.validate();
        const Eigen::Index in = spec.input_dim();
        switch (spec.topology) {
            case Topology::mlp7: model_ = Mlp7(in, spec.mlp_hidden, spec.joints); break;
            case Topology::lstm2: model_ = Lstm2(in, spec.lstm_hidden, spec.joints); break;
            case Topology::lstm_fcl: model_ = LstmFcl(in, spec.lstm_hidden, spec.joints); break;
            case Topology::transformer:
                model_ = TransformerEncoder(in, spec.d_model, spec.heads, spec.layers, spec.ffn, spec.joints,
                                            spec.positional_encoding);
                break;
        }
        Rng rng(spec.seed);
        std::visit([&](auto& m) { m.init(rng); }, model_);
        input_norm = Normalizer::identity(in);
        output_norm = Normalizer::identity(spec.joints);
    }

    const NetworkSpec& spec() const { return spec_; }

    ParameterRefs parameters() {
        ParameterRefs refs;
        std::visit([&](auto& m) { m.collect(refs); }, model_);
        return refs;
    }

    Eigen::Index parameter_count() { return count_parameters(parameters()); }

    /// Raw network output (normalized torque space), joints x B.
    Eigen::MatrixXd forward_normalized(const Eigen::MatrixXd& x) const {
        check_input(x);
        return std::visit(
            [&](const auto& m) {
                typename std::decay_t<decltype(m)>::Tape tape;
                return m.forward(x, spec_.steps, tape);
            },
            model_);
    }

    /// Network torque contribution in Nm for already-normalized inputs.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const { return output_norm.denormalize(forward_normalized(x)); }

    /**
     * Mean over batch and joints of the squared torque error in Nm between the
     * denormalized output and `target`. Gradients replace the stored ones.
     * A non-finite loss raises TrainingFault and leaves the gradients unspecified.
     */
    double loss_and_grad(const Eigen::MatrixXd& x, const Eigen::MatrixXd& target) {
        check_input(x);
        const Eigen::Index batch = x.cols() / spec_.steps;
        if (target.rows() != spec_.joints || target.cols() != batch) {
            throw ContractError("loss target must be joints x batch");
        }
        ParameterRefs refs = parameters();
        zero_grad(refs);
        return std::visit(
            [&](auto& m) {
                typename std::decay_t<decltype(m)>::Tape tape;
                const Eigen::MatrixXd y = m.forward(x, spec_.steps, tape);
                const Eigen::MatrixXd err = output_norm.denormalize(y) - target;
                const double count = static_cast<double>(err.size());
                const double loss = err.squaredNorm() / count;
                if (!std::isfinite(loss)) {
                    throw TrainingFault("non-finite training loss");
                }
                const Eigen::MatrixXd dy = (err.array().colwise() * output_norm.stddev.array()).matrix() * (2.0 / count);
                m.backward(tape, dy);
                return loss;
            },
            model_);
    }

    /// Loss only, without touching gradients.
    double loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& target) const {
        const Eigen::MatrixXd err = forward(x) - target;
        return err.squaredNorm() / static_cast<double>(err.size());
    }

    Normalizer input_norm;
    Normalizer output_norm;

private:
    void check_input(const Eigen::MatrixXd& x) const {
        if (x.rows() != spec_.input_dim()) {
            throw ContractError("network expects " + std::to_string(spec_.input_dim()) + " input features, got " +
                                std::to_string(x.rows()));
        }
        if (x.cols() == 0 || x.cols() % spec_.steps != 0) {
            throw ContractError("window length does not match the network's T = " + std::to_string(spec_.steps));
        }
    }

    NetworkSpec spec_;
    Model model_;
};

// ---------------------------------------------------------------------------
// Checkpoints

inline void write_spec(TextSection& s, const NetworkSpec& spec) {
    s.set("topology", to_string(spec.topology));
    s.set("steps", std::to_string(spec.steps));
    s.set("use_r", spec.use_r ? "true" : "false");
    s.set("use_tau_rbd", spec.use_tau_rbd ? "true" : "false");
    s.set("hybrid_output_add", spec.hybrid_output_add ? "true" : "false");
    s.set("joints", std::to_string(spec.joints));
    s.set("mlp_hidden", std::to_string(spec.mlp_hidden));
    s.set("lstm_hidden", std::to_string(spec.lstm_hidden));
    s.set("d_model", std::to_string(spec.d_model));
    s.set("heads", std::to_string(spec.heads));
    s.set("layers", std::to_string(spec.layers));
    s.set("ffn", std::to_string(spec.ffn));
    s.set("positional_encoding", spec.positional_encoding ? "true" : "false");
    s.set("seed", std::to_string(spec.seed));
}

/// Reads a spec from a section; missing keys keep the values of `base`.
inline NetworkSpec read_spec(const TextSection& s, NetworkSpec base = {}) {
    if (auto v = s.find("topology")) base.topology = parse_topology(trim(*v));
    base.steps = static_cast<int>(s.get_int("steps", base.steps));
    base.use_r = s.get_bool("use_r", base.use_r);
    base.use_tau_rbd = s.get_bool("use_tau_rbd", base.use_tau_rbd);
    base.hybrid_output_add = s.get_bool("hybrid_output_add", base.hybrid_output_add);
    base.joints = static_cast<int>(s.get_int("joints", base.joints));
    base.mlp_hidden = static_cast<int>(s.get_int("mlp_hidden", base.mlp_hidden));
    base.lstm_hidden = static_cast<int>(s.get_int("lstm_hidden", base.lstm_hidden));
    base.d_model = static_cast<int>(s.get_int("d_model", base.d_model));
    base.heads = static_cast<int>(s.get_int("heads", base.heads));
    base.layers = static_cast<int>(s.get_int("layers", base.layers));
    base.ffn = static_cast<int>(s.get_int("ffn", base.ffn));
    base.positional_encoding = s.get_bool("positional_encoding", base.positional_encoding);
    base.seed = static_cast<std::uint64_t>(s.get_int("seed", static_cast<long long>(base.seed)));
    return base;
}

inline void append_network(TextDocument& doc, Network& net) {
    auto& s = doc.add("network");
    s.set("version", "1");
    write_spec(s, net.spec());
    auto& in = doc.add("input_normalizer");
    in.set("mean", join_doubles(net.input_norm.mean));
    in.set("std", join_doubles(net.input_norm.stddev));
    auto& out = doc.add("output_normalizer");
    out.set("mean", join_doubles(net.output_norm.mean));
    out.set("std", join_doubles(net.output_norm.stddev));
    for (const Parameter* p : net.parameters()) {
        auto& t = doc.add("tensor");
        t.set("name", p->name);
        t.set("rows", std::to_string(p->value.rows()));
        t.set("cols", std::to_string(p->value.cols()));
        t.set("values", join_doubles(p->value.reshaped()));
    }
}

namespace detail {

inline Eigen::VectorXd read_vector(const TextSection& s, const char* key, Eigen::Index expected) {
    const auto values = s.get_doubles(key);
    if (static_cast<Eigen::Index>(values.size()) != expected) {
        throw IoError("[" + s.name + "] " + key + " has " + std::to_string(values.size()) + " entries, expected " +
                      std::to_string(expected));
    }
    return Eigen::Map<const Eigen::VectorXd>(values.data(), expected);
}

}  // namespace detail

inline Network network_from_document(const TextDocument& doc) {
    const TextSection* s = doc.find("network");
    if (!s) throw IoError("checkpoint has no [network] section");
    if (s->get_int("version", 0) != 1) throw IoError("unsupported network checkpoint version");
    NetworkSpec spec;
    try {
        spec = read_spec(*s);
        spec.validate();
    } catch (const ContractError& e) {
        throw IoError(std::string("invalid network spec in checkpoint: ") + e.what());
    } catch (const InputDomainError& e) {
        throw IoError(std::string("invalid network spec in checkpoint: ") + e.what());
    }
    Network net(spec);
    const TextSection* in = doc.find("input_normalizer");
    const TextSection* out = doc.find("output_normalizer");
    if (!in || !out) throw IoError("checkpoint is missing normalizer sections");
    net.input_norm.mean = detail::read_vector(*in, "mean", spec.input_dim());
    net.input_norm.stddev = detail::read_vector(*in, "std", spec.input_dim());
    net.output_norm.mean = detail::read_vector(*out, "mean", spec.joints);
    net.output_norm.stddev = detail::read_vector(*out, "std", spec.joints);
    const auto tensors = doc.find_all("tensor");
    const ParameterRefs params = net.parameters();
    if (tensors.size() != params.size()) {
        throw IoError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, network expects " +
                      std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        const TextSection& t = *tensors[i];
        if (trim(t.get("name")) != p.name || t.get_int("rows", -1) != p.value.rows() ||
            t.get_int("cols", -1) != p.value.cols()) {
            throw IoError("checkpoint tensor " + std::to_string(i) + " does not match parameter " + p.name);
        }
        p.value.reshaped() = detail::read_vector(t, "values", p.size());
    }
    return net;
}

}  // namespace lidym::nn
