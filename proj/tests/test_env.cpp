#include <doctest.h>

#include <cmath>

#include "tubenav/env.hpp"

using namespace tubenav;

namespace {

// Context fixture with hand-settable features; defaults describe a centered,
// aligned pose in a straight tube.
struct CtxFixture {
    TubeSpec tube = make_straight_tube(30.0, 1.0);
    RewardContext ctx;

    CtxFixture() {
        ctx.tube = &tube;
        ctx.state = DroneState{};
        ctx.state.position = {0.0, 0.0, 15.0};
        ctx.nearest = nearest_point(tube.centerline, ctx.state.position);
        ctx.features.s_f = 1.0;
        ctx.features.s_r = 1.0;
        ctx.features.m_f = 0.5;
        ctx.features.m_r = 0.5;
        ctx.features.l_min = 0.2;
        ctx.t = 100;
        ctx.t_warmup = 20;
    }

    void see_target() {
        ctx.target.visible = true;
        ctx.target.direction_local = {0.0, 0.0, 1.0};
        ctx.target.depth_norm = 0.8;
    }
    void remember_target(const Vec3& world_dir) {
        ctx.target = TargetObservation{};
        ctx.memory.valid = true;
        ctx.memory.last_direction_world = world_dir;
        ctx.memory.last_direction_local = ctx.state.world_to_local(world_dir);
        ctx.memory.steps_since_seen = 3;
    }
    void go_blind() {
        ctx.target = TargetObservation{};
        ctx.memory = DirectionalMemory::cleared(40);
    }
};

} // namespace

TEST_CASE("trajectory scores at the spec anchor points") {
    CtxFixture fx;
    fx.see_target();
    const TrajectoryScores s = trajectory_scores(fx.ctx);
    CHECK(s.s_center == 1.0);
    CHECK(s.s_align == 1.0);
    CHECK(s.s_traj == 1.0);

    fx.ctx.state.position = {1.0, 0.0, 15.0}; // d_perp = R
    fx.ctx.nearest = nearest_point(fx.tube.centerline, fx.ctx.state.position);
    CHECK(trajectory_scores(fx.ctx).s_center == 0.0);

    CtxFixture fx2;
    fx2.ctx.state.position = {0.3, 0.0, 15.0}; // d_perp = 0.3 R
    fx2.ctx.nearest = nearest_point(fx2.tube.centerline, fx2.ctx.state.position);
    fx2.ctx.target.visible = true;
    // direction with forward component exactly 0.8
    fx2.ctx.target.direction_local = {0.6, 0.0, 0.8};
    const TrajectoryScores s2 = trajectory_scores(fx2.ctx);
    CHECK(s2.s_align == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(s2.s_traj == doctest::Approx(0.5 * 0.7 + 0.5 * 0.8).epsilon(1e-12));
}

TEST_CASE("alignment falls back to memory, then to the tube tangent") {
    CtxFixture fx;
    fx.remember_target(Vec3{0.0, 0.6, 0.8});
    CHECK(regime_of(fx.ctx) == RewardRegime::memorized);
    CHECK(trajectory_scores(fx.ctx).s_align == doctest::Approx(0.8).epsilon(1e-12));

    fx.go_blind();
    CHECK(regime_of(fx.ctx) == RewardRegime::blind);
    CHECK(trajectory_scores(fx.ctx).s_align == doctest::Approx(1.0).epsilon(1e-12)); // aligned with +z

    fx.see_target();
    fx.ctx.memory.valid = true; // visible wins regardless of memory
    CHECK(regime_of(fx.ctx) == RewardRegime::visible);
}

TEST_CASE("adaptive weights follow their formulas and rear/front ratio grows with turn confidence") {
    CHECK(front_weight(0.0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(rear_weight(0.0) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(front_weight(1.0) == doctest::Approx(0.36).epsilon(1e-12));
    CHECK(rear_weight(1.0) == doctest::Approx(0.56).epsilon(1e-12));
    double prev_ratio = 0.0;
    for (double c = 0.0; c <= 1.0; c += 0.05) {
        CHECK(front_weight(c) == doctest::Approx(0.6 * (1.0 - 0.4 * c)).epsilon(1e-15));
        CHECK(rear_weight(c) == doctest::Approx(0.4 * (1.0 + 0.4 * c)).epsilon(1e-15));
        const double ratio = rear_weight(c) / front_weight(c);
        CHECK(ratio > prev_ratio);
        prev_ratio = ratio;
    }
}

TEST_CASE("reward case 1 hand evaluation") {
    CtxFixture fx;
    fx.see_target();
    // S_align=1, S_F=S_R=1, C_turn=0, mu_F=0.5, dFH=0, t >= warmup:
    // 1 + 0.6 + 0.4 + 0.2 + 0.3 = 2.5
    CHECK(compute_reward(fx.ctx) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("reward case 2 hand evaluation") {
    CtxFixture fx;
    fx.remember_target({0.0, 0.0, 1.0});
    fx.ctx.features.h_f = 0.2;
    fx.ctx.features.v_f = -0.1;
    fx.ctx.features.s_f = 1.0 - 0.5 * (0.2 + 0.1);
    // S_align=1, wF*SF + wR*SR with c=0: 0.6*0.85 + 0.4*1 = 0.91
    // + 0.4*(1-0.2) + 0.3*(1-0.1) = 0.32 + 0.27
    CHECK(compute_reward(fx.ctx) == doctest::Approx(1.0 + 0.91 + 0.32 + 0.27).epsilon(1e-12));
}

TEST_CASE("reward case 3 hand evaluation") {
    CtxFixture fx;
    fx.go_blind();
    // wF + wR at c=0 with S=1: 0.6 + 0.4; + 0.4*0.5 - 0.3*0 = 1.2
    CHECK(compute_reward(fx.ctx) == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("warm-up bonus vanishes exactly at t_warmup and is continuous") {
    CtxFixture fx;
    fx.go_blind();
    fx.ctx.t = 19;
    const double with_bonus = compute_reward(fx.ctx);
    fx.ctx.t = 20;
    const double without = compute_reward(fx.ctx);
    CHECK(with_bonus - without == doctest::Approx(0.5).epsilon(1e-12)); // S_F=S_R=1, c=0

    // continuity of the bonus in its score arguments
    const double base = warmup_bonus(0.7, 0.6, 0.3);
    for (double eps : {1e-6, 1e-9}) {
        CHECK(std::abs(warmup_bonus(0.7 + eps, 0.6, 0.3) - base) <= 2.0 * eps);
        CHECK(std::abs(warmup_bonus(0.7, 0.6 + eps, 0.3) - base) <= 2.0 * eps);
        CHECK(std::abs(warmup_bonus(0.7, 0.6, 0.3 + eps) - base) <= 2.0 * eps);
    }
    CHECK(warmup_bonus(0.7, 0.6, 0.3) ==
          doctest::Approx(0.5 * (0.7 * 0.7 + 0.3 * 0.6) * (1.0 - 0.1) * (1.0 - 0.15)).epsilon(1e-12));
}

TEST_CASE("exactly one reward regime applies to any context") {
    Rng rng(31);
    CtxFixture fx;
    for (int i = 0; i < 1000; ++i) {
        fx.ctx.target.visible = rng.uniform() < 0.5;
        fx.ctx.memory.valid = rng.uniform() < 0.5;
        const RewardRegime r = regime_of(fx.ctx);
        if (fx.ctx.target.visible) CHECK(r == RewardRegime::visible);
        if (!fx.ctx.target.visible && fx.ctx.memory.valid) CHECK(r == RewardRegime::memorized);
        if (!fx.ctx.target.visible && !fx.ctx.memory.valid) CHECK(r == RewardRegime::blind);
    }
}

TEST_CASE("shaped reward is bounded over random contexts") {
    Rng rng(41);
    CtxFixture fx;
    // bounds from the case formulas: min(case 1) = -1, max(case 1 + warmup) = 3.2
    const double lo = -1.0 - 1e-9, hi = 3.2 + 1e-9;
    for (int i = 0; i < 100000; ++i) {
        auto& f = fx.ctx.features;
        f.h_f = rng.uniform(-1, 1);
        f.v_f = rng.uniform(-1, 1);
        f.h_r = rng.uniform(-1, 1);
        f.v_r = rng.uniform(-1, 1);
        f.s_f = rng.uniform(0, 1);
        f.s_r = rng.uniform(0, 1);
        f.m_f = rng.uniform(0, 1);
        f.m_r = rng.uniform(0, 1);
        f.c_turn = rng.uniform(0, 1);
        fx.ctx.t = rng.uniform_int(0, 40);
        fx.ctx.target.visible = rng.uniform() < 0.4;
        const double z = rng.uniform(-1, 1);
        const double xy = std::sqrt(1.0 - z * z);
        const double phi = rng.uniform(0, 6.283185307179586);
        fx.ctx.target.direction_local = {xy * std::cos(phi), xy * std::sin(phi), z};
        fx.ctx.memory.valid = rng.uniform() < 0.5;
        fx.ctx.memory.last_direction_world = fx.ctx.target.direction_local; // any unit vector
        const double r = compute_reward(fx.ctx);
        CHECK(std::isfinite(r));
        CHECK(r >= lo);
        CHECK(r <= hi);
    }
}

TEST_CASE("observation layout hash is frozen") {
    CHECK(observation_layout_hash() == 0xaa01f7cd7e849f91ull);
}

TEST_CASE("initial observation of an aligned straight tube") {
    WorkbenchConfig cfg;
    TubeEnv env(cfg);
    const Observation obs = env.reset_with_tube(make_straight_tube(30.0, 1.0));
    const auto& o = obs.values;

    // lidar block: zero asymmetries, full symmetry
    CHECK(o[0] == 0.0);
    CHECK(o[1] == 0.0);
    CHECK(o[2] == 0.0);
    CHECK(o[3] == 0.0);
    CHECK(o[4] == 1.0);
    CHECK(o[5] == 1.0);
    // R=1, d_max=5: front beams read 0.2 -> rescaled -0.6. The rear ring pokes
    // slightly past the start cap at s=0, shaving a little off its distances.
    CHECK(o[6] == doctest::Approx(-0.6).epsilon(1e-9));
    CHECK(o[7] == doctest::Approx(-0.6).epsilon(1e-2));
    CHECK(o[8] == doctest::Approx(-0.6).epsilon(1e-2));

    CHECK(o[20] == -1.0);                        // global progression at the start
    CHECK(o[21] == 0.0);                         // radial offset
    CHECK(o[24] == 0.0);                         // camera direction x
    CHECK(o[26] == 1.0);                         // camera direction z: aligned
    CHECK(o[28] == 1.0);                         // visible flag
    CHECK(o[33] == 1.0);                         // memory flag (refreshed at reset)
    CHECK(o[34] == 1.0);                         // safety metric saturated mid-tube
    CHECK(o[35] == 1.0);                         // inside flag
    CHECK(o[36] == -1.0);                        // episode progress at t = 0
    for (double v : o) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("observation flags for an invisible target with live memory") {
    CtxFixture fx;
    fx.remember_target({0.0, 0.0, 1.0});
    ObservationParams params;
    const Observation obs = build_observation(fx.ctx, params);
    CHECK(obs.values[28] == -1.0);
    CHECK(obs.values[33] == 1.0);
    CHECK(obs.values[27] == -1.0); // depth rescales to -1 when invisible
}

TEST_CASE("same level and seed reset twice produces identical observations") {
    WorkbenchConfig cfg;
    TubeEnv env1(cfg), env2(cfg);
    const Observation a = env1.reset_seeded(1, 5);
    const Observation b = env2.reset_seeded(1, 5);
    for (int i = 0; i < kObsDim; ++i) CHECK(a.values[i] == b.values[i]);

    // identical action sequences stay bitwise identical
    for (int step = 0; step < 50; ++step) {
        const int action = (step * 7) % kNumActions;
        const StepOutcome oa = env1.step(action);
        const StepOutcome ob = env2.step(action);
        CHECK(oa.reward == ob.reward);
        for (int i = 0; i < kObsDim; ++i) CHECK(oa.observation.values[i] == ob.observation.values[i]);
        if (oa.terminal != Terminal::running) break;
    }
}

TEST_CASE("success adds exactly +10 to the shaped reward") {
    WorkbenchConfig cfg;
    TubeEnv env(cfg);
    env.reset_with_tube(make_straight_tube(12.0, 1.0));
    StepOutcome out;
    int guard = 0;
    while (env.running() && guard++ < 500) out = env.step(3); // straight, full speed
    REQUIRE(out.terminal == Terminal::success);
    const double shaped = compute_reward(env.context());
    CHECK(out.reward == shaped + 10.0);
}

TEST_CASE("wall breach terminates with exactly -10 on top") {
    WorkbenchConfig cfg;
    TubeEnv env(cfg);
    env.reset_with_tube(make_straight_tube(30.0, 1.0));
    StepOutcome out;
    int guard = 0;
    while (env.running() && guard++ < 500) out = env.step_continuous({1.0, 0.0, 0.0}, 1.5);
    REQUIRE(out.terminal == Terminal::failure);
    const double shaped = compute_reward(env.context());
    CHECK(out.reward == shaped - 10.0);
    CHECK_FALSE(env.last_info().inside);
}

TEST_CASE("timeout terminates with exactly -1 on top") {
    WorkbenchConfig cfg;
    cfg.env.t_max = 5;
    TubeEnv env(cfg);
    env.reset_with_tube(make_straight_tube(30.0, 1.0));
    StepOutcome out;
    while (env.running()) out = env.step(0);
    REQUIRE(out.terminal == Terminal::timeout);
    const double shaped = compute_reward(env.context());
    CHECK(out.reward == shaped - 1.0);
    CHECK_THROWS_AS(env.step(0), std::logic_error);
}

TEST_CASE("curriculum advances on the exact threshold and never regresses") {
    CurriculumManager mgr(100, 0.85, 0.80, 0.80);
    for (int i = 0; i < 15; ++i) mgr.record(Terminal::failure);
    for (int i = 0; i < 84; ++i) mgr.record(Terminal::success);
    CHECK(mgr.level() == 0); // 84/99: window not full yet at 84 successes
    mgr.record(Terminal::success);
    CHECK(mgr.level() == 1); // 85/100 meets the 0.85 threshold
    CHECK(mgr.window_count() == 0);

    CurriculumManager stay(100, 0.85, 0.80, 0.80);
    for (int i = 0; i < 16; ++i) stay.record(Terminal::failure);
    for (int i = 0; i < 84; ++i) stay.record(Terminal::success);
    CHECK(stay.level() == 0); // 84/100 stays below threshold

    CurriculumManager top(10, 0.85, 0.80, 0.80);
    std::deque<bool> empty;
    top.restore(2, empty);
    for (int i = 0; i < 50; ++i) top.record(Terminal::success);
    CHECK(top.level() == 2); // terminal level

    // free-function form returns the advanced copy
    CurriculumManager base(1, 0.85, 0.80, 0.80);
    const CurriculumManager adv = record_and_maybe_advance(base, Terminal::success);
    CHECK(adv.level() == 1);
    CHECK(base.level() == 0);
}

TEST_CASE("curriculum level sequence is non-decreasing under random outcomes") {
    Rng rng(17);
    CurriculumManager mgr(20, 0.85, 0.80, 0.80);
    int prev = mgr.level();
    for (int i = 0; i < 5000; ++i) {
        mgr.record(rng.uniform() < 0.9 ? Terminal::success : Terminal::failure);
        CHECK(mgr.level() >= prev);
        prev = mgr.level();
    }
    CHECK(prev == 2);
}
