#include "tubenav/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string_view>

namespace tubenav {

std::uint64_t observation_layout_hash() {
    constexpr std::string_view layout =
        "hf,vf,hr,vr,sf,sr,mf,mr,lmin|fwd3,up3,right3,speed,dv,progress,offset3|"
        "camdir3,depth,visible|invratio,memdir3,memflag|safety,inside,episode";
    std::uint64_t h = 1469598103934665603ull;
    for (char c : layout) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

RewardRegime regime_of(const RewardContext& ctx) {
    if (ctx.target.visible) return RewardRegime::visible;
    if (ctx.memory.valid) return RewardRegime::memorized;
    return RewardRegime::blind;
}

double front_weight(double c_turn) { return 0.6 * (1.0 - 0.4 * c_turn); }
double rear_weight(double c_turn) { return 0.4 * (1.0 + 0.4 * c_turn); }

TrajectoryScores trajectory_scores(const RewardContext& ctx) {
    TrajectoryScores out;
    out.s_center = std::clamp(1.0 - ctx.nearest.d_perp / ctx.tube->radius, 0.0, 1.0);
    switch (regime_of(ctx)) {
        case RewardRegime::visible:
            out.s_align = dot(ctx.state.forward, ctx.state.local_to_world(ctx.target.direction_local));
            break;
        case RewardRegime::memorized:
            out.s_align = dot(ctx.state.forward, ctx.memory.last_direction_world);
            break;
        case RewardRegime::blind:
            out.s_align = dot(ctx.state.forward, ctx.nearest.tangent);
            break;
    }
    out.s_traj = 0.5 * out.s_center + 0.5 * out.s_align;
    return out;
}

double warmup_bonus(double s_f, double s_r, double c_turn) {
    return 0.5 * (0.7 * s_f + 0.3 * s_r) * (1.0 - std::abs(s_f - s_r)) * (1.0 - 0.5 * c_turn);
}

double compute_reward(const RewardContext& ctx) {
    const LidarFeatures& f = ctx.features;
    const double w_f = front_weight(f.c_turn);
    const double w_r = rear_weight(f.c_turn);
    const double s_align = trajectory_scores(ctx).s_align;

    double r = 0.0;
    switch (regime_of(ctx)) {
        case RewardRegime::visible:
            r = s_align + w_f * f.s_f + w_r * f.s_r + 0.4 * f.m_f + 0.3 * (1.0 - std::abs(f.h_f));
            break;
        case RewardRegime::memorized:
            r = s_align + w_f * f.s_f + w_r * f.s_r + 0.4 * (1.0 - std::abs(f.h_f)) +
                0.3 * (1.0 - std::abs(f.v_f));
            break;
        case RewardRegime::blind:
            r = w_f * f.s_f + w_r * f.s_r + 0.4 * f.m_f - 0.3 * std::abs(f.s_f - f.s_r);
            break;
    }
    if (ctx.t < ctx.t_warmup) r += warmup_bonus(f.s_f, f.s_r, f.c_turn);
    return r;
}

Observation build_observation(const RewardContext& ctx, const ObservationParams& p) {
    auto clip1 = [](double v) { return std::clamp(v, -1.0, 1.0); };
    auto rescale01 = [&](double v) { return clip1(2.0 * v - 1.0); };

    Observation obs;
    auto& o = obs.values;
    const LidarFeatures& f = ctx.features;
    int i = 0;

    // lidar (9)
    o[i++] = clip1(f.h_f);
    o[i++] = clip1(f.v_f);
    o[i++] = clip1(f.h_r);
    o[i++] = clip1(f.v_r);
    o[i++] = rescale01(f.s_f);
    o[i++] = rescale01(f.s_r);
    o[i++] = rescale01(f.m_f);
    o[i++] = rescale01(f.m_r);
    o[i++] = rescale01(f.l_min);

    // kinematics (15)
    const DroneState& st = ctx.state;
    o[i++] = clip1(st.forward.x);
    o[i++] = clip1(st.forward.y);
    o[i++] = clip1(st.forward.z);
    o[i++] = clip1(st.up.x);
    o[i++] = clip1(st.up.y);
    o[i++] = clip1(st.up.z);
    o[i++] = clip1(st.right.x);
    o[i++] = clip1(st.right.y);
    o[i++] = clip1(st.right.z);
    o[i++] = rescale01(st.speed / p.v_max);
    o[i++] = clip1((st.speed - st.prev_speed) / p.v_max);
    o[i++] = rescale01(ctx.nearest.s / ctx.tube->centerline.total_length);
    const Vec3 offset = (st.position - ctx.nearest.point) / p.radius;
    o[i++] = clip1(offset.x);
    o[i++] = clip1(offset.y);
    o[i++] = clip1(offset.z);

    // camera (5)
    o[i++] = clip1(ctx.target.direction_local.x);
    o[i++] = clip1(ctx.target.direction_local.y);
    o[i++] = clip1(ctx.target.direction_local.z);
    o[i++] = rescale01(ctx.target.depth_norm);
    o[i++] = ctx.target.visible ? 1.0 : -1.0;

    // memory (5)
    const double ratio = std::min(static_cast<double>(ctx.memory.steps_since_seen) / p.memory_horizon, 1.0);
    o[i++] = rescale01(ratio);
    o[i++] = clip1(ctx.memory.last_direction_local.x);
    o[i++] = clip1(ctx.memory.last_direction_local.y);
    o[i++] = clip1(ctx.memory.last_direction_local.z);
    o[i++] = ctx.memory.valid ? 1.0 : -1.0;

    // context (3)
    const double l_min_meters = f.l_min * p.d_max;
    o[i++] = rescale01(std::clamp(l_min_meters / p.ell_safe, 0.0, 1.0));
    o[i++] = p.inside ? 1.0 : -1.0;
    o[i++] = rescale01(static_cast<double>(ctx.t) / p.t_max);
    return obs;
}

void CurriculumManager::record(Terminal outcome) {
    window_.push_back(outcome == Terminal::success);
    if (static_cast<int>(window_.size()) > window_size_) window_.pop_front();
    if (window_full() && level_ < 2 && window_success_rate() >= thresholds_[level_]) {
        ++level_;
        window_.clear();
    }
}

double CurriculumManager::window_success_rate() const {
    if (window_.empty()) return 0.0;
    int wins = 0;
    for (bool b : window_)
        if (b) ++wins;
    return static_cast<double>(wins) / window_.size();
}

void CurriculumManager::restore(int level, const std::deque<bool>& window) {
    if (level < 0 || level > 2) throw std::invalid_argument("curriculum level must be 0, 1 or 2");
    level_ = level;
    window_ = window;
}

CurriculumManager record_and_maybe_advance(CurriculumManager mgr, Terminal outcome) {
    mgr.record(outcome);
    return mgr;
}

CurriculumManager make_curriculum(const EnvConfig& cfg) {
    return CurriculumManager(cfg.window, cfg.threshold_level0, cfg.threshold_level1, cfg.threshold_level2);
}

TubeEnv::TubeEnv(const WorkbenchConfig& cfg) : cfg_(cfg) {
    intrinsics_.f_w = cfg.dynamics.fw_over_c;
    intrinsics_.f_h = cfg.dynamics.fh_over_c;
    intrinsics_.c = 1.0;
    space_ = build_action_space(intrinsics_, cfg.dynamics.k_action, cfg.dynamics.v_max);
}

Observation TubeEnv::reset(int level, Rng& rng) {
    return reset_with_tube(sample_curriculum_tube(level, rng, cfg_.geometry));
}

Observation TubeEnv::reset_seeded(int level, std::uint64_t seed) {
    return reset_with_tube(sample_curriculum_tube_seeded(level, seed, cfg_.geometry));
}

Observation TubeEnv::reset_with_tube(TubeSpec tube) {
    tube_ = std::move(tube);
    const auto& start = tube_.centerline.samples.front();
    state_ = DroneState{};
    state_.position = start.position;
    state_.forward = start.tangent;
    Vec3 up_ref = Vec3{0.0, 1.0, 0.0} - state_.forward * state_.forward.y;
    if (up_ref.norm() < 1e-9) up_ref = Vec3{1.0, 0.0, 0.0} - state_.forward * state_.forward.x;
    state_.up = up_ref.normalized();
    state_.right = cross(state_.up, state_.forward).normalized();
    state_.up = cross(state_.forward, state_.right).normalized();
    state_.speed = space_.speeds[0];
    state_.prev_speed = state_.speed;

    memory_ = DirectionalMemory::cleared(cfg_.sensing.memory_horizon);
    t_ = 0;
    terminal_ = Terminal::running;
    sense_and_finish(/*with_reward=*/false);
    return obs_;
}

StepOutcome TubeEnv::step(int action_index) {
    if (action_index < 0 || action_index >= kNumActions)
        throw std::invalid_argument("action index outside [0, 36)");
    const Vec3 dir = action_to_direction(state_, space_.direction_of(action_index));
    return step_continuous(dir, space_.speed_of(action_index));
}

StepOutcome TubeEnv::step_continuous(const Vec3& commanded_dir_world, double commanded_speed) {
    if (terminal_ != Terminal::running) throw std::logic_error("step() on a finished episode");
    state_ = step_kinematic(state_, commanded_dir_world, commanded_speed, cfg_.dynamics.dt,
                            cfg_.dynamics.max_turn_rate, cfg_.dynamics.accel_max, cfg_.dynamics.v_max);
    ++t_;
    sense_and_finish(/*with_reward=*/true);
    return StepOutcome{obs_, info_.reward, terminal_};
}

SenseResult sense_pipeline(const TubeSpec& tube, const DroneState& state, DirectionalMemory& memory,
                           int t, const WorkbenchConfig& cfg) {
    CameraIntrinsics intrinsics;
    intrinsics.f_w = cfg.dynamics.fw_over_c;
    intrinsics.f_h = cfg.dynamics.fh_over_c;
    intrinsics.c = 1.0;

    const double d_max = cfg.d_max();
    const LidarScan front =
        lidar_scan(tube, state, LidarRing::front, cfg.sensing.n_beams, d_max, cfg.sensing.ring_offset);
    const LidarScan rear =
        lidar_scan(tube, state, LidarRing::rear, cfg.sensing.n_beams, d_max, cfg.sensing.ring_offset);

    SenseResult out;
    out.ctx.features = lidar_features(front, rear);
    out.ctx.target = camera_detect(tube, state, intrinsics, cfg.lookahead(), cfg.depth_max());
    memory = update_memory(memory, out.ctx.target, state, cfg.sensing.memory_horizon);
    out.ctx.memory = memory;
    out.ctx.state = state;
    out.ctx.tube = &tube;
    out.ctx.nearest = nearest_point(tube.centerline, state.position);
    out.ctx.t = t;
    out.ctx.t_warmup = cfg.env.t_warmup;

    out.inside = !front.degenerate && is_inside(tube, state.position);
    out.scores = trajectory_scores(out.ctx);

    ObservationParams params;
    params.v_max = cfg.dynamics.v_max;
    params.radius = tube.radius;
    params.d_max = d_max;
    params.ell_safe = cfg.ell_safe();
    params.memory_horizon = cfg.sensing.memory_horizon;
    params.t_max = cfg.env.t_max;
    params.inside = out.inside;
    out.obs = build_observation(out.ctx, params);
    return out;
}

void TubeEnv::sense_and_finish(bool with_reward) {
    SenseResult sense = sense_pipeline(tube_, state_, memory_, t_, cfg_);
    ctx_ = sense.ctx;
    ctx_.tube = &tube_; // keep the pointer on this env's own tube
    obs_ = sense.obs;

    double reward = 0.0;
    if (with_reward) {
        reward = compute_reward(ctx_);
        const double goal_s = tube_.centerline.total_length - cfg_.eps_goal();
        if (ctx_.nearest.s >= goal_s) {
            terminal_ = Terminal::success;
            reward += 10.0;
        } else if (!sense.inside) {
            terminal_ = Terminal::failure;
            reward += -10.0;
        } else if (t_ >= cfg_.env.t_max) {
            terminal_ = Terminal::timeout;
            reward += -1.0;
        }
    }

    info_.t = t_;
    info_.position = state_.position;
    info_.d_perp = ctx_.nearest.d_perp;
    info_.progression = ctx_.nearest.s;
    info_.s_center = sense.scores.s_center;
    info_.s_align = sense.scores.s_align;
    info_.s_traj = sense.scores.s_traj;
    info_.c_turn = ctx_.features.c_turn;
    info_.regime = regime_of(ctx_);
    info_.reward = reward;
    info_.inside = sense.inside;
    info_.terminal = terminal_;
}

} // namespace tubenav
