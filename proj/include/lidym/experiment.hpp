#pragma once

/**
 * @file experiment.hpp
 * @brief Desk-scale experiment: plant, identification data, LIMO training
 *        data, a large-amplitude validation set and the ablation settings,
 *        all derived from one seed and one key-value config file.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "lidym/chain.hpp"
#include "lidym/evaluation.hpp"
#include "lidym/identification.hpp"
#include "lidym/limopa.hpp"
#include "lidym/plant.hpp"
#include "lidym/training.hpp"

namespace lidym {

struct ExperimentConfig {
    double rate = 100.0;
    TimingConfig timing;
    LimopaConfig limopa = [] {
        LimopaConfig c;
        c.scaffolds = 12;
        c.exploration.length_min = 400;
        c.exploration.length_max = 500;
        return c;
    }();
    ExcitationSpec excitation = [] {
        ExcitationSpec s;
        s.duration = 60.0;
        s.base_frequency = 1.0 / 60.0;
        s.amplitude = 0.5;
        s.offset_spread = 0.5;
        return s;
    }();
    int excitation_budget = 200;  ///< optimize_excitation evaluations; 0 uses the random seed trajectory
    ExcitationSpec validation = [] {
        ExcitationSpec s;
        s.duration = 60.0;
        s.base_frequency = 1.0 / 60.0;
        s.amplitude = 0.5;
        return s;
    }();
    FilterSpec filter;
    int t_short = 25;
    int t_long = 50;
    nn::NetworkSpec widths;
    AblationConfig ablation = [] {
        AblationConfig a;
        a.train.epochs = 30;
        a.train.runs = 2;
        return a;
    }();
    std::vector<std::string> variants;  ///< grid subset by variant name; empty runs the whole grid
    TextSection plant_overrides;
};

inline ExcitationSpec excitation_spec_from(const TextSection& s, ExcitationSpec e) {
    e.harmonics = static_cast<int>(s.get_int("harmonics", e.harmonics));
    e.base_frequency = s.get_double("base_frequency", e.base_frequency);
    e.duration = s.get_double("duration", e.duration);
    e.amplitude = s.get_double("amplitude", e.amplitude);
    e.margin = s.get_double("margin", e.margin);
    e.velocity_fraction = s.get_double("velocity_fraction", e.velocity_fraction);
    e.offset_spread = s.get_double("offset_spread", e.offset_spread);
    return e;
}

inline TrainConfig train_config_from(const TextSection& s, TrainConfig c) {
    c.epochs = static_cast<int>(s.get_int("epochs", c.epochs));
    c.batch = static_cast<int>(s.get_int("batch", c.batch));
    c.lr = s.get_double("lr", c.lr);
    c.weight_decay = s.get_double("weight_decay", c.weight_decay);
    c.plateau_patience = static_cast<int>(s.get_int("plateau_patience", c.plateau_patience));
    c.plateau_factor = s.get_double("plateau_factor", c.plateau_factor);
    c.runs = static_cast<int>(s.get_int("runs", c.runs));
    c.windows_per_epoch = static_cast<int>(s.get_int("windows_per_epoch", c.windows_per_epoch));
    c.holdout_windows = static_cast<int>(s.get_int("holdout_windows", c.holdout_windows));
    c.validate();
    return c;
}

inline nn::NetworkSpec network_widths_from(const TextSection& s, nn::NetworkSpec w) {
    w.mlp_hidden = static_cast<int>(s.get_int("mlp_hidden", w.mlp_hidden));
    w.lstm_hidden = static_cast<int>(s.get_int("lstm_hidden", w.lstm_hidden));
    w.d_model = static_cast<int>(s.get_int("d_model", w.d_model));
    w.heads = static_cast<int>(s.get_int("heads", w.heads));
    w.layers = static_cast<int>(s.get_int("layers", w.layers));
    w.ffn = static_cast<int>(s.get_int("ffn", w.ffn));
    w.positional_encoding = s.get_bool("positional_encoding", w.positional_encoding);
    return w;
}

/**
 * Sections: [data] rate, ramp_time; [limopa] (see limopa_config_from);
 * [excitation] and [validation] (see excitation_spec_from) plus
 * [excitation] budget; [filter] cutoff_hz, enabled; [plant]; [network]
 * widths; [train]; [ablation] t_short, t_long, train_fraction,
 * holdout_fraction, sequence_windows_per_epoch,
 * transformer_windows_per_epoch, eval_windows, variant (repeatable).
 */
inline ExperimentConfig experiment_config_from(const TextDocument& doc, ExperimentConfig c = {}) {
    const TextSection data = doc.section_or_empty("data");
    c.rate = data.get_double("rate", c.rate);
    c.timing.ramp_time = data.get_double("ramp_time", c.timing.ramp_time);
    if (!(c.rate > 0.0) || !(c.timing.ramp_time > 0.0)) throw InputDomainError("[data] rate and ramp_time must be positive");
    c.limopa = limopa_config_from(doc.section_or_empty("limopa"), c.limopa);
    const TextSection exc = doc.section_or_empty("excitation");
    c.excitation = excitation_spec_from(exc, c.excitation);
    c.excitation_budget = static_cast<int>(exc.get_int("budget", c.excitation_budget));
    c.validation = excitation_spec_from(doc.section_or_empty("validation"), c.validation);
    const TextSection filt = doc.section_or_empty("filter");
    c.filter.cutoff_hz = filt.get_double("cutoff_hz", c.filter.cutoff_hz);
    c.filter.enabled = filt.get_bool("enabled", c.filter.enabled);
    c.plant_overrides = doc.section_or_empty("plant");
    c.widths = network_widths_from(doc.section_or_empty("network"), c.widths);
    c.ablation.train = train_config_from(doc.section_or_empty("train"), c.ablation.train);
    const TextSection abl = doc.section_or_empty("ablation");
    c.t_short = static_cast<int>(abl.get_int("t_short", c.t_short));
    c.t_long = static_cast<int>(abl.get_int("t_long", c.t_long));
    c.ablation.train_fraction = abl.get_double("train_fraction", c.ablation.train_fraction);
    c.ablation.holdout_fraction = abl.get_double("holdout_fraction", c.ablation.holdout_fraction);
    c.ablation.sequence_windows_per_epoch =
        static_cast<int>(abl.get_int("sequence_windows_per_epoch", c.ablation.sequence_windows_per_epoch));
    c.ablation.transformer_windows_per_epoch =
        static_cast<int>(abl.get_int("transformer_windows_per_epoch", c.ablation.transformer_windows_per_epoch));
    c.ablation.eval_windows = static_cast<int>(abl.get_int("eval_windows", c.ablation.eval_windows));
    for (const auto& v : abl.get_all("variant")) c.variants.push_back(trim(v));
    if (c.t_short < 2 || c.t_long < 2) throw InputDomainError("[ablation] sequence lengths must be at least 2");
    return c;
}

/// Every artifact of one experiment instance.
struct ExperimentData {
    PlantModel plant;
    FourierTrajectory excitation;
    Dataset identification;
    IdentifiedRbdModel rbd;
    ConfigPath path;
    Dataset training;
    FourierTrajectory validation_trajectory;
    Dataset validation;
};

/// Fourier excitation sampled over its duration and replayed on the plant.
inline Dataset excitation_dataset(const PlantModel& plant, const FourierTrajectory& traj, double rate,
                                  std::uint64_t plant_seed) {
    Dataset d = sense_torques(plant, sample_fourier(traj, rate, traj.duration), plant_seed);
    d.set_meta("rate", format_double(rate));
    d.set_meta("plant_seed", std::to_string(plant_seed));
    d.set_meta("plant_digest", plant.digest());
    return d;
}

inline IdentifiedRbdModel identify_from_dataset(const RobotChain& chain, const Dataset& d, const FilterSpec& filter) {
    return identify_rbd(chain, preprocess(d.t, d.q, d.tau, d.rate, filter));
}

/// Identification excitation: optimized when a budget is configured, else the random seed trajectory.
inline FourierTrajectory design_excitation(const ExperimentConfig& config, const RobotChain& chain, std::uint64_t seed) {
    return config.excitation_budget > 0
               ? optimize_excitation(chain, config.excitation, config.excitation_budget, seed).trajectory
               : synth_excitation(chain, config.excitation, seed);
}

/**
 * Seeds: excitation mix_seed(seed, 10), its sensing (seed, 11); LIMO path
 * (seed, 12), its sensing (seed, 13); validation trajectory (seed, 14), its
 * sensing (seed, 15).
 */
inline ExperimentData prepare_experiment(const ExperimentConfig& config, const RobotChain& chain,
                                         const Eigen::VectorXd& phi, std::uint64_t seed) {
    ExperimentData e;
    e.plant = plant_from_section(config.plant_overrides, PlantModel::with_defaults(chain, phi));
    e.excitation = design_excitation(config, chain, mix_seed(seed, 10));
    e.identification = excitation_dataset(e.plant, e.excitation, config.rate, mix_seed(seed, 11));
    e.rbd = identify_from_dataset(chain, e.identification, config.filter);
    e.path = generate_limo_path(chain, config.limopa, mix_seed(seed, 12));
    e.training = generate_dataset(e.plant, e.path, config.rate, mix_seed(seed, 13), mix_seed(seed, 12), config.timing);
    e.validation_trajectory = synth_excitation(chain, config.validation, mix_seed(seed, 14));
    e.validation = excitation_dataset(e.plant, e.validation_trajectory, config.rate, mix_seed(seed, 15));
    return e;
}

inline std::vector<AblationVariant> experiment_grid(const ExperimentConfig& config) {
    const auto full = standard_grid(config.t_short, config.t_long, config.widths);
    if (config.variants.empty()) return full;
    std::vector<AblationVariant> out;
    for (const auto& name : config.variants) {
        bool found = false;
        for (const auto& v : full) {
            if (v.name() == name) {
                out.push_back(v);
                found = true;
            }
        }
        if (!found) throw InputDomainError("unknown ablation variant '" + name + "'");
    }
    return out;
}

}  // namespace lidym
