#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "tubenav/bridge.hpp"
#include "tubenav/config.hpp"
#include "tubenav/eval.hpp"
#include "tubenav/ppo.hpp"

namespace {

using namespace tubenav;

WorkbenchConfig load_or_default(const std::string& path) {
    if (path.empty()) return WorkbenchConfig{};
    return load_config(path);
}

int cmd_gen_tubes(int level, int count, std::uint64_t seed, const std::string& out_dir,
                  const WorkbenchConfig& cfg) {
    std::filesystem::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
        const std::uint64_t tube_seed = seed + static_cast<std::uint64_t>(i);
        const TubeSpec tube = sample_curriculum_tube_seeded(level, tube_seed, cfg.geometry);
        const auto [mesh, line] = export_obj(tube, cfg.geometry.circle_segments);
        const std::string mesh_path = out_dir + "/tube_" + std::to_string(tube_seed) + ".obj";
        const std::string line_path = out_dir + "/centerline_" + std::to_string(tube_seed) + ".obj";
        std::ofstream(mesh_path) << mesh;
        std::ofstream(line_path) << line;
        std::cout << "wrote " << mesh_path << " and " << line_path << "\n";
    }
    return 0;
}

int cmd_train(const WorkbenchConfig& cfg, const std::string& out_dir) {
    Trainer trainer(cfg, out_dir);
    StopCondition stop;
    stop.max_iterations = cfg.ppo.max_iterations;
    stop.max_wall_seconds = cfg.ppo.max_wall_seconds;
    stop.target_level = 2;
    stop.target_success = cfg.env.threshold_level2;
    const TrainResult result = trainer.run(stop, [](const IterationLog& log) {
        std::cout << "iter " << log.iteration << " level " << log.level << " success "
                  << log.success_rate << " return " << log.mean_return << " episodes " << log.episodes
                  << "\n";
    });
    std::cout << "final level " << result.final_level << ", gate success " << result.final_gate_success
              << ", checkpoint: " << result.last_checkpoint << "\n";
    return 0;
}

int cmd_eval(const WorkbenchConfig& cfg, const std::string& checkpoint, int level, int episodes,
             std::uint64_t seed, const std::string& record_path) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    PolicyController controller(ck.params);
    TubeEnv env(cfg);
    int wins = 0, exits = 0, timeouts = 0;
    double q = 0.0;
    std::ofstream record;
    if (!record_path.empty()) record.open(record_path);
    for (int i = 0; i < episodes; ++i) {
        const std::uint64_t tube_seed = paired_tube_seed(seed, level, i);
        TubeSpec tube = sample_curriculum_tube_seeded(level, tube_seed, cfg.geometry);
        const EpisodeRecord rec = run_episode(controller, env, std::move(tube));
        if (rec.terminal == Terminal::success) ++wins;
        if (rec.terminal == Terminal::failure) ++exits;
        if (rec.terminal == Terminal::timeout) ++timeouts;
        q += quality_index(rec);
        if (record.is_open()) write_episode_record(rec, record);
    }
    std::cout << "level " << level << ": success " << 100.0 * wins / episodes << "%, exits "
              << 100.0 * exits / episodes << "%, timeouts " << 100.0 * timeouts / episodes
              << "%, quality " << q / episodes << "\n";
    return 0;
}

int cmd_compare(const WorkbenchConfig& cfg, const std::string& checkpoint, const std::string& levels_str,
                int episodes, std::uint64_t seed, const std::string& out_path, bool sweep,
                bool continuous) {
    CompareOptions opt;
    opt.levels.clear();
    std::istringstream ls(levels_str);
    std::string tok;
    while (std::getline(ls, tok, ',')) opt.levels.push_back(std::stoi(tok));
    opt.n_episodes = episodes;
    opt.base_seed = seed;
    opt.pp_lookahead_sweep = sweep;
    opt.pp_continuous = continuous;

    std::optional<Checkpoint> ck;
    if (!checkpoint.empty()) ck = load_checkpoint(checkpoint);
    const ComparisonTable table = compare(cfg, ck ? &ck->params : nullptr, opt);
    std::cout << table_to_text(table);
    if (!out_path.empty()) {
        std::ofstream(out_path) << table_to_csv(table);
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_bridge(const WorkbenchConfig& cfg, const std::string& checkpoint, const std::string& tube_obj,
               const std::string& centerline_obj, const std::string& transport,
               const std::string& shm_name, double dt, double delta_t, const std::string& role,
               const std::string& record_path) {
    PlantConfig plant_cfg;
    plant_cfg.dt_control = dt;
    plant_cfg.delta_t = delta_t;
    plant_cfg.gains.k_vel = cfg.dynamics.k_vel;
    plant_cfg.gains.k_att = cfg.dynamics.k_att;
    plant_cfg.gains.k_damp = cfg.dynamics.k_damp;
    plant_cfg.gains.lambda = cfg.dynamics.lambda_gravity;

    auto make_initial_body = [&]() {
        const TubeSpec tube = tube_from_obj_files(tube_obj, centerline_obj);
        const auto& start = tube.centerline.samples.front();
        RigidBodyState body;
        body.position = start.position;
        Vec3 up_ref = Vec3{0.0, 1.0, 0.0} - start.tangent * start.tangent.y;
        if (up_ref.norm() < 1e-9) up_ref = Vec3{1.0, 0.0, 0.0} - start.tangent * start.tangent.x;
        const Vec3 up = up_ref.normalized();
        const Vec3 right = cross(up, start.tangent).normalized();
        body.orientation = Quaternion::from_basis(right, cross(start.tangent, right).normalized(),
                                                  start.tangent);
        body.mass = cfg.dynamics.mass;
        body.inertia_diag = {cfg.dynamics.inertia_xx, cfg.dynamics.inertia_yy, cfg.dynamics.inertia_zz};
        return body;
    };

    if (role == "plant") {
        auto ch = make_shm_channel(shm_name, /*create=*/false);
        const std::uint64_t n = plant_loop(make_initial_body(), *ch, plant_cfg);
        std::cout << "plant answered " << n << " commands\n";
        return 0;
    }

    std::unique_ptr<Channel> ch;
    std::thread plant_thread;
    if (transport == "shm") {
        ch = make_shm_channel(shm_name, role != "driver");
    } else if (transport == "inproc") {
        ch = make_inproc_channel();
    } else {
        throw std::runtime_error("unknown transport: " + transport);
    }
    if (role == "both") {
        plant_thread = std::thread([&]() { plant_loop(make_initial_body(), *ch, plant_cfg); });
    }

    const EpisodeRecord rec =
        inference_driver(checkpoint, tube_obj, centerline_obj, *ch, cfg, DriverOptions{});
    if (plant_thread.joinable()) plant_thread.join();

    std::cout << "bridge episode: " << terminal_name(rec.terminal) << " after " << rec.steps.size()
              << " steps\n";
    if (!record_path.empty()) {
        std::ofstream f(record_path);
        write_episode_record(rec, f);
        std::cout << "wrote " << record_path << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tubular-navigation workbench"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "sectioned key=value config file")->check(CLI::ExistingFile);

    // gen-tubes
    auto* gen = app.add_subcommand("gen-tubes", "export curriculum tubes as OBJ meshes + centerlines");
    int gen_level = 0, gen_count = 1;
    std::uint64_t gen_seed = 0;
    std::string gen_out = ".";
    gen->add_option("--level", gen_level, "curriculum level")->check(CLI::Range(0, 2))->required();
    gen->add_option("--count", gen_count, "number of tubes")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "base seed");
    gen->add_option("--out", gen_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "run PPO training with the curriculum");
    std::string train_out = "train_out";
    bool desk_scale = false, paper_scale = false;
    train->add_option("--out", train_out, "output directory (metrics + checkpoints)")->required();
    train->add_flag("--desk-scale", desk_scale, "4 workers, batch 2000, minibatch 200");
    train->add_flag("--paper-scale", paper_scale, "13 workers, batch 13000, minibatch 1300");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint greedily");
    std::string eval_ckpt, eval_record;
    int eval_level = 0, eval_episodes = 100;
    std::uint64_t eval_seed = 0;
    ev->add_option("--checkpoint", eval_ckpt, "checkpoint file")->check(CLI::ExistingFile)->required();
    ev->add_option("--level", eval_level, "curriculum level")->check(CLI::Range(0, 2))->required();
    ev->add_option("--episodes", eval_episodes, "episode count")->check(CLI::PositiveNumber);
    ev->add_option("--seed", eval_seed, "base seed");
    ev->add_option("--log-steps", eval_record, "write per-step episode records to this file");

    // compare
    auto* cmp = app.add_subcommand("compare", "paired PPO vs Pure Pursuit comparison");
    std::string cmp_ckpt, cmp_levels = "0,1,2", cmp_out;
    int cmp_episodes = 100;
    std::uint64_t cmp_seed = 0;
    bool cmp_sweep = false, cmp_continuous = false;
    cmp->add_option("--checkpoint", cmp_ckpt, "checkpoint file (omit for baseline-only)")
        ->check(CLI::ExistingFile);
    cmp->add_option("--levels", cmp_levels, "comma-separated levels");
    cmp->add_option("--episodes", cmp_episodes, "episodes per level")->check(CLI::PositiveNumber);
    cmp->add_option("--seed", cmp_seed, "base seed (paired tubes)");
    cmp->add_option("--out", cmp_out, "write the table as CSV");
    cmp->add_flag("--pp-lookahead-sweep", cmp_sweep, "tune PP lookahead over {2,3,4,6}R per level");
    cmp->add_flag("--continuous", cmp_continuous, "PP bypasses the discrete action snap");

    // bridge
    auto* br = app.add_subcommand("bridge", "physics-bridge inference over the lockstep protocol");
    std::string br_ckpt, br_tube, br_line, br_transport = "inproc", br_shm = "/tubenav_bridge",
                br_role = "both", br_record;
    double br_dt = 0.1, br_delta = 0.005;
    br->add_option("--checkpoint", br_ckpt, "checkpoint file");
    br->add_option("--tube-obj", br_tube, "tube mesh OBJ")->required();
    br->add_option("--centerline-obj", br_line, "centerline OBJ")->required();
    br->add_option("--transport", br_transport, "inproc | shm");
    br->add_option("--shm-name", br_shm, "shared-memory name (shm transport)");
    br->add_option("--dt", br_dt, "control step seconds");
    br->add_option("--delta-t", br_delta, "physics substep seconds");
    br->add_option("--role", br_role, "both | driver | plant");
    br->add_option("--record", br_record, "write the episode record to this file");

    // emit-plots
    auto* plots = app.add_subcommand("emit-plots", "columnar plot data from a metrics file");
    std::string plots_metrics, plots_out = "plots";
    plots->add_option("--metrics", plots_metrics, "metrics.csv from train")->check(CLI::ExistingFile)->required();
    plots->add_option("--out", plots_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        WorkbenchConfig cfg = load_or_default(config_path);
        if (gen->parsed()) return cmd_gen_tubes(gen_level, gen_count, gen_seed, gen_out, cfg);
        if (train->parsed()) {
            if (desk_scale) cfg.ppo.apply_desk_scale();
            if (paper_scale) cfg.ppo.apply_paper_scale();
            return cmd_train(cfg, train_out);
        }
        if (ev->parsed()) return cmd_eval(cfg, eval_ckpt, eval_level, eval_episodes, eval_seed, eval_record);
        if (cmp->parsed())
            return cmd_compare(cfg, cmp_ckpt, cmp_levels, cmp_episodes, cmp_seed, cmp_out, cmp_sweep,
                               cmp_continuous);
        if (br->parsed())
            return cmd_bridge(cfg, br_ckpt, br_tube, br_line, br_transport, br_shm, br_dt, br_delta,
                              br_role, br_record);
        if (plots->parsed()) {
            emit_plots(plots_metrics, plots_out);
            std::cout << "wrote plot data to " << plots_out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
