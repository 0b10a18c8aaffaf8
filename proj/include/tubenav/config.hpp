#ifndef TUBENAV_CONFIG_HPP
#define TUBENAV_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>

namespace tubenav {

struct GeometryConfig {
    double radius = 1.0;       // tube radius R, meters
    double tube_length = 30.0; // nominal axial length, meters
    int n_samples = 256;       // centerline samples after smoothing/blending
    int raw_points = 128;      // points emitted by the raw-curve generator
    int circle_segments = 32;  // default ring resolution for OBJ export
};

struct SensingConfig {
    int n_beams = 36;              // per ring; 10 degree spacing
    double d_max_factor = 5.0;     // lidar normalization range, units of R
    double lookahead_factor = 4.0; // camera target sits this far ahead, units of R
    double depth_max_factor = 5.0; // camera depth normalization range, units of R
    int memory_horizon = 40;       // steps a lost target direction stays valid
    double ring_offset = 0.15;     // longitudinal offset of each ring, meters
};

struct DynamicsConfig {
    double v_max = 1.5;          // m/s
    double max_turn_rate = 2.0;  // rad/s
    double accel_max = 2.5;      // m/s^2
    double dt = 0.1;             // control step, seconds
    double delta_t = 0.005;      // inner physics step, seconds
    double k_action = 0.75;      // cone scale for the 9 directions
    double fw_over_c = 1.0;      // camera half-width / focal
    double fh_over_c = 0.7;      // camera half-height / focal
    double lambda_gravity = 0.9; // partial gravity compensation
    double mass = 1.0;           // kg
    double inertia_xx = 0.005;
    double inertia_yy = 0.005;
    double inertia_zz = 0.009;
    double k_vel = 12.0; // velocity-error gain, 1/s
    double k_att = 8.0;  // attitude torque gain
    double k_damp = 1.2; // angular rate damping
};

struct EnvConfig {
    int t_warmup = 20;
    // Long enough to traverse a 30 m tube at the lowest speed level (0.375 m/s
    // covers ~45 m in 1200 steps); every action moves forward, so a surviving
    // episode always reaches the end within this budget.
    int t_max = 1200;
    double eps_goal_factor = 0.5; // success margin, units of R
    double ell_safe_factor = 0.5; // safety-metric scale, units of R
    int window = 100;             // curriculum gating window, episodes
    double threshold_level0 = 0.85;
    double threshold_level1 = 0.80;
    double threshold_level2 = 0.80;
};

struct PurePursuitFileConfig {
    double lookahead_factor = 4.0; // units of R
    std::string speed_policy = "fixed";
    double v_cmd = 1.125; // m/s
    double kappa_ref = 0.35;
};

struct PpoConfig {
    double lr = 3e-4;
    double gamma = 0.99;
    double lambda_gae = 0.95;
    double clip = 0.3;
    double entropy_coef = 0.003;
    double vf_coef = 0.5;
    int epochs_per_iter = 10;
    int n_workers = 4;      // desk-scale default
    int train_batch = 2000; // desk-scale default
    int minibatch = 200;    // desk-scale default
    int rollout_len = 200;
    int max_iterations = 10000;
    double max_wall_seconds = 0.0; // 0 = unlimited
    int checkpoint_every = 50;
    std::uint64_t seed = 1;

    void apply_desk_scale() {
        n_workers = 4;
        train_batch = 2000;
        minibatch = 200;
    }
    void apply_paper_scale() {
        n_workers = 13;
        train_batch = 13000;
        minibatch = 1300;
    }
};

struct BridgeConfig {
    std::string transport = "inproc"; // inproc | shm
    std::string shm_name = "/tubenav_bridge";
    double dt = 0.1;
    double delta_t = 0.005;
};

struct WorkbenchConfig {
    GeometryConfig geometry;
    SensingConfig sensing;
    DynamicsConfig dynamics;
    EnvConfig env;
    PurePursuitFileConfig pure_pursuit;
    PpoConfig ppo;
    BridgeConfig bridge;

    double d_max() const { return sensing.d_max_factor * geometry.radius; }
    double lookahead() const { return sensing.lookahead_factor * geometry.radius; }
    double depth_max() const { return sensing.depth_max_factor * geometry.radius; }
    double eps_goal() const { return env.eps_goal_factor * geometry.radius; }
    double ell_safe() const { return env.ell_safe_factor * geometry.radius; }
};

// Sectioned key=value file: [section] headers, '#' or ';' comments.
// Unknown keys are an error so typos do not silently fall back to defaults.
WorkbenchConfig load_config(const std::string& path);
WorkbenchConfig apply_config_text(const std::string& text, WorkbenchConfig base);
std::string dump_config(const WorkbenchConfig& cfg);

} // namespace tubenav

#endif
