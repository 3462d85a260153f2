// Small end-to-end run on the synthetic 7-DOF plant: identify the rigid-body
// model, record a short LIMO path, train an MLP-7 hybrid and compare it with
// the rigid-body model on held-out windows, then replay a few samples through
// the streaming predictor.

#include <iomanip>
#include <iostream>

#include "lidym/lidym.hpp"

int main() {
    using namespace lidym;
    try {
        const RobotChain chain = reference_chain();
        const PlantModel plant = PlantModel::with_defaults(chain, reference_parameters());

        ExcitationSpec excitation;
        excitation.duration = 60.0;
        excitation.base_frequency = 1.0 / 60.0;
        excitation.amplitude = 0.5;
        excitation.offset_spread = 0.5;
        const FourierTrajectory traj = optimize_excitation(chain, excitation, 40, 1).trajectory;
        const IdentifiedRbdModel rbd =
            identify_from_dataset(chain, excitation_dataset(plant, traj, 100.0, 2), FilterSpec{});
        std::cout << "identified " << rbd.base.rank() << " base parameters, cond " << rbd.condition << '\n';

        LimopaConfig limo;
        limo.scaffolds = 4;
        limo.exploration.length_min = 300;
        limo.exploration.length_max = 400;
        const Dataset data = generate_dataset(plant, generate_limo_path(chain, limo, 3), 100.0, 4, 3);
        const FeatureTable table = build_feature_table(data, rbd);
        std::cout << "LIMO dataset: " << data.size() << " samples in " << table.ranges.size() << " segments\n";

        nn::NetworkSpec spec;
        spec.topology = nn::Topology::mlp7;
        spec.use_tau_rbd = true;
        spec.hybrid_output_add = true;
        spec.use_r = true;
        TrainConfig config;
        config.epochs = 15;
        config.runs = 1;
        const WindowSplit split = split_windows(window_ends(table, spec.steps), 0.8, 0.1, 5);
        const TrainedHybrid model = train(spec, rbd, table, split, config);

        const EvalReport report{{evaluate_rbd(table, split.test, "test"), evaluate(model, table, split.test, "test")}};
        std::cout << '\n' << report_markdown(report) << '\n';

        HybridPredictor stream(model);
        std::cout << "joint 2 torque along the first samples [Nm]\n"
                  << "      t   measured        RBD     hybrid\n";
        for (int k = 0; k < 10; ++k) {
            stream.push(JointState{table.q.col(k), table.qd.col(k), table.qdd.col(k)});
            std::cout << std::fixed << std::setprecision(2) << std::setw(7) << table.t(k) << std::setprecision(4)
                      << std::setw(11) << table.target(1, k) << std::setw(11) << stream.rbd()(1) << std::setw(11)
                      << stream.predict()(1) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
