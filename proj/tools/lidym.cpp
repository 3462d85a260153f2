// lidym: command-line front end for identification, LIMO path generation,
// plant simulation, hybrid training, evaluation and the ablation grid.

#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lidym/lidym.hpp"

namespace fs = std::filesystem;
using namespace lidym;

namespace {

struct GlobalOptions {
    std::uint64_t seed = 1;
    std::string config;
    std::string out = ".";
    std::string robot;
    std::string params;
};

struct Context {
    ExperimentConfig config;
    RobotChain chain;
    Eigen::VectorXd phi;
    std::uint64_t seed = 1;
    fs::path out;

    std::string file(const std::string& name) const { return (out / name).string(); }
};

Context make_context(const GlobalOptions& g) {
    Context c;
    c.seed = g.seed;
    if (!g.config.empty()) c.config = experiment_config_from(TextDocument::load(g.config));
    c.chain = g.robot.empty() ? reference_chain() : load_robot(g.robot);
    c.phi = g.params.empty() ? reference_parameters() : load_parameters(g.params);
    check_parameter_dimension(c.chain, c.phi);
    c.out = g.out;
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec) throw IoError("cannot create output directory '" + g.out + "': " + ec.message());
    return c;
}

PlantModel make_plant(const Context& c) {
    return plant_from_section(c.config.plant_overrides, PlantModel::with_defaults(c.chain, c.phi));
}

std::string slug(const std::string& name) {
    std::string s;
    for (char ch : name) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        } else if (!s.empty() && s.back() != '_') {
            s += '_';
        }
    }
    while (!s.empty() && s.back() == '_') s.pop_back();
    return s;
}

AblationVariant find_variant(const ExperimentConfig& config, const std::string& name) {
    for (const auto& v : standard_grid(config.t_short, config.t_long, config.widths)) {
        if (v.name() == name) return v;
    }
    throw InputDomainError("unknown variant '" + name + "'; run 'lidym report --variants' for the list");
}

void write_logs(const Context& c, const TrainedHybrid& model, const std::string& prefix) {
    for (int run = 0; run < c.config.ablation.train.runs; ++run) {
        write_text_file(c.file(prefix + "run" + std::to_string(run) + ".csv"), training_log_csv(model.history, run));
    }
}

int run_identify(const Context& c, const std::string& data_file) {
    Dataset data;
    if (data_file.empty()) {
        const FourierTrajectory excitation = design_excitation(c.config, c.chain, mix_seed(c.seed, 10));
        data = excitation_dataset(make_plant(c), excitation, c.config.rate, mix_seed(c.seed, 11));
        save_dataset(c.file("identification.csv"), data);
    } else {
        data = load_dataset(data_file);
    }
    if (data.joints() != c.chain.size()) {
        throw ContractError("dataset has " + std::to_string(data.joints()) + " joints, robot has " +
                            std::to_string(c.chain.size()));
    }
    const IdentifiedRbdModel model = identify_from_dataset(c.chain, data, c.config.filter);
    save_rbd_model(c.file("rbd_model.txt"), model);
    std::cout << "samples " << data.size() << ", base parameters " << model.base.rank() << ", cond "
              << model.condition << ", residual MSE " << model.residual_mse.mean() << " Nm^2\n";
    return 0;
}

int run_limopa(const Context& c) {
    const ConfigPath path = generate_limo_path(c.chain, c.config.limopa, mix_seed(c.seed, 12));
    save_path(c.file("path.csv"), path);
    std::cout << "waypoints " << path.size() << " (" << c.config.limopa.scaffolds << " scaffolds)\n";
    return 0;
}

int run_simulate(const Context& c, const std::string& path_file, bool excitation, bool validation,
                 const std::string& name) {
    const PlantModel plant = make_plant(c);
    Dataset data;
    if (!path_file.empty()) {
        const ConfigPath path = load_path(path_file);
        data = generate_dataset(plant, path, c.config.rate, mix_seed(c.seed, 13), mix_seed(c.seed, 12),
                                c.config.timing);
    } else if (excitation) {
        const FourierTrajectory traj = design_excitation(c.config, c.chain, mix_seed(c.seed, 10));
        data = excitation_dataset(plant, traj, c.config.rate, mix_seed(c.seed, 11));
    } else if (validation) {
        const FourierTrajectory traj = synth_excitation(c.chain, c.config.validation, mix_seed(c.seed, 14));
        data = excitation_dataset(plant, traj, c.config.rate, mix_seed(c.seed, 15));
    } else {
        throw InputDomainError("simulate needs --path, --excitation or --validation");
    }
    save_dataset(c.file(name), data);
    std::cout << "samples " << data.size() << ", segments " << data.segment_ranges().size() << " -> "
              << c.file(name) << '\n';
    return 0;
}

int run_train(const Context& c, const std::string& data_file, const std::string& rbd_file, std::string variant_name,
              const std::string& name) {
    if (variant_name.empty()) variant_name = "LSTM-FCL " + std::to_string(c.config.t_long) + " with tau_RBD, r";
    const AblationVariant variant = find_variant(c.config, variant_name);
    if (variant.rbd_only) throw InputDomainError("the RBD variant has nothing to train");
    const IdentifiedRbdModel rbd = load_rbd_model(rbd_file);
    const FeatureTable table = build_feature_table(load_dataset(data_file), rbd, c.config.filter);
    const WindowSplit split = split_windows(window_ends(table, variant.spec.steps), c.config.ablation.train_fraction,
                                            c.config.ablation.holdout_fraction, mix_seed(c.seed, 0));
    const TrainedHybrid model =
        train(variant.spec, rbd, table, split, variant_train_config(c.config.ablation, variant, c.seed));
    save_hybrid(c.file(name), model);
    write_logs(c, model, "train_log_");
    EvalReport report;
    for (const auto& [split_name, ends] : {std::pair{"train", split.train}, std::pair{"test", split.test}}) {
        report.rows.push_back(
            evaluate(model, table, strided_subset(ends, c.config.ablation.eval_windows), split_name));
    }
    report.rows.push_back(
        evaluate_rbd(table, strided_subset(split.test, c.config.ablation.eval_windows), "test"));
    std::cout << "best run " << model.best_run << ", holdout MSE " << model.best_val_mse << "\n\n"
              << report_markdown(report);
    return 0;
}

int run_eval(const Context& c, const std::string& data_file, const std::string& model_file,
             const std::string& rbd_file, const std::string& split, const std::string& plot_file) {
    if (model_file.empty() == rbd_file.empty()) throw InputDomainError("eval needs exactly one of --model or --rbd");
    const Dataset data = load_dataset(data_file);
    EvalReport report;
    std::vector<std::pair<std::string, Eigen::MatrixXd>> plots;
    if (!model_file.empty()) {
        const TrainedHybrid model = load_hybrid(model_file);
        const FeatureTable table = build_feature_table(data, model.rbd, c.config.filter);
        const auto ends = strided_subset(window_ends(table, model.spec().steps), c.config.ablation.eval_windows);
        report.rows.push_back(evaluate(model, table, ends, split));
        report.rows.push_back(evaluate_rbd(table, ends, split));
        if (!plot_file.empty()) {
            plots.emplace_back(model.spec().label(), predict_windows(model, table, ends));
            plots.emplace_back("RBD", gather_columns(table.tau_rbd, ends, 0, ends.size()));
            write_text_file(plot_file, plot_csv(table, ends, plots));
        }
    } else {
        const IdentifiedRbdModel rbd = load_rbd_model(rbd_file);
        const FeatureTable table = build_feature_table(data, rbd, c.config.filter);
        const auto ends = strided_subset(window_ends(table, 1), c.config.ablation.eval_windows);
        report.rows.push_back(evaluate_rbd(table, ends, split));
        if (!plot_file.empty()) {
            plots.emplace_back("RBD", gather_columns(table.tau_rbd, ends, 0, ends.size()));
            write_text_file(plot_file, plot_csv(table, ends, plots));
        }
    }
    write_text_file(c.file("eval.csv"), report_csv(report));
    std::cout << report_markdown(report);
    return 0;
}

int run_ablate(const Context& c, bool save_data) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    const auto grid = experiment_grid(c.config);
    const ExperimentData e = prepare_experiment(c.config, c.chain, c.phi, c.seed);
    save_rbd_model(c.file("rbd_model.txt"), e.rbd);
    save_path(c.file("path.csv"), e.path);
    if (save_data) {
        save_dataset(c.file("identification.csv"), e.identification);
        save_dataset(c.file("training.csv"), e.training);
        save_dataset(c.file("validation.csv"), e.validation);
    }
    const FeatureTable data = build_feature_table(e.training, e.rbd, c.config.filter);
    const FeatureTable validation = build_feature_table(e.validation, e.rbd, c.config.filter);
    std::cerr << "training samples " << data.size() << ", validation samples " << validation.size()
              << ", RBD cond " << e.rbd.condition << '\n';
    fs::create_directories(c.out / "checkpoints");
    fs::create_directories(c.out / "logs");
    auto variant_start = clock::now();
    const AblationObserver observer = [&](const AblationVariant& v, const TrainedHybrid* model,
                                          const std::vector<EvalRow>& rows) {
        const std::string id = slug(v.name());
        if (model) {
            save_hybrid(c.file("checkpoints/" + id + ".txt"), *model);
            write_logs(c, *model, "logs/" + id + "_");
        }
        const double seconds = std::chrono::duration<double>(clock::now() - variant_start).count();
        std::cerr << v.name() << ": ";
        for (const auto& r : rows) std::cerr << r.split << ' ' << r.average << "  ";
        std::cerr << '(' << std::fixed << std::setprecision(1) << seconds << " s)" << std::defaultfloat << std::setprecision(6) << '\n';
        variant_start = clock::now();
    };
    const EvalReport report = run_ablation(grid, e.rbd, data, &validation, c.config.ablation, c.seed, observer);
    write_text_file(c.file("report.csv"), report_csv(report));
    write_text_file(c.file("report.md"), report_markdown(report));
    std::cout << report_markdown(report);
    std::cerr << "total " << std::fixed << std::setprecision(1)
              << std::chrono::duration<double>(clock::now() - start).count() << " s\n" << std::defaultfloat;
    return 0;
}

int run_report(const Context& c, const std::string& report_file, bool list_variants) {
    if (list_variants) {
        for (const auto& v : standard_grid(c.config.t_short, c.config.t_long, c.config.widths)) {
            std::cout << v.name() << '\n';
        }
        return 0;
    }
    if (report_file.empty()) throw InputDomainError("report needs --report or --variants");
    const std::string md = report_markdown(load_report(report_file));
    write_text_file(c.file("report.md"), md);
    std::cout << md;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid joint-torque modelling: identification, LIMO paths, simulation and training"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
    app.add_option("--config", g.config, "Experiment config file");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--robot", g.robot, "Robot description file (default: built-in 7-DOF arm)");
    app.add_option("--params", g.params, "Inertial parameter file for the simulated plant");

    std::string data_file, rbd_file, model_file, path_file, variant, split = "test", plot_file, report_file;
    std::string name;
    bool excitation = false, validation = false, save_data = false, list_variants = false;

    auto* identify = app.add_subcommand("identify", "Identify base inertial parameters (writes rbd_model.txt)");
    identify->add_option("--data", data_file, "Dataset CSV; omitted: simulate the configured excitation");

    app.add_subcommand("limopa-gen", "Generate a LIMO configuration path (writes path.csv)");

    auto* simulate = app.add_subcommand("simulate", "Replay a path or excitation on the synthetic plant");
    auto* sim_path = simulate->add_option("--path", path_file, "LIMO path CSV");
    auto* sim_exc = simulate->add_flag("--excitation", excitation, "Configured identification excitation");
    auto* sim_val = simulate->add_flag("--validation", validation, "Large-amplitude validation excitation");
    sim_path->excludes(sim_exc)->excludes(sim_val);
    sim_exc->excludes(sim_val);
    simulate->add_option("--name", name, "Output file name")->default_val("dataset.csv");

    auto* train_cmd = app.add_subcommand("train", "Train one hybrid variant (writes the checkpoint and logs)");
    train_cmd->add_option("--data", data_file, "Training dataset CSV")->required();
    train_cmd->add_option("--rbd", rbd_file, "Identified RBD model")->required();
    train_cmd->add_option("--variant", variant, "Variant name, e.g. \"LSTM-FCL 50 with tau_RBD, r\"");
    train_cmd->add_option("--name", name, "Checkpoint file name")->default_val("model.txt");

    auto* eval = app.add_subcommand("eval", "Score a model on a dataset (writes eval.csv)");
    eval->add_option("--data", data_file, "Dataset CSV")->required();
    eval->add_option("--model", model_file, "Hybrid checkpoint");
    eval->add_option("--rbd", rbd_file, "RBD model alone");
    eval->add_option("--split", split, "Split tag written to the report")->capture_default_str();
    eval->add_option("--plot", plot_file, "Also write tidy plot data to this CSV");

    auto* ablate = app.add_subcommand("ablate", "Run the ablation grid end to end (writes report.csv, report.md)");
    ablate->add_flag("--save-data", save_data, "Also write the generated datasets");

    auto* report = app.add_subcommand("report", "Render a report CSV as markdown");
    report->add_option("--report", report_file, "Report CSV");
    report->add_flag("--variants", list_variants, "List the grid variant names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const Context c = make_context(g);
        if (*identify) return run_identify(c, data_file);
        if (app.got_subcommand("limopa-gen")) return run_limopa(c);
        if (*simulate) return run_simulate(c, path_file, excitation, validation, name);
        if (*train_cmd) return run_train(c, data_file, rbd_file, variant, name);
        if (*eval) return run_eval(c, data_file, model_file, rbd_file, split, plot_file);
        if (*ablate) return run_ablate(c, save_data);
        if (*report) return run_report(c, report_file, list_variants);
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
