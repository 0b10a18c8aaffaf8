#ifndef TUBENAV_ENV_HPP
#define TUBENAV_ENV_HPP

#include <array>
#include <cstdint>
#include <deque>
#include <optional>

#include "tubenav/config.hpp"
#include "tubenav/dynamics.hpp"
#include "tubenav/geometry.hpp"
#include "tubenav/rng.hpp"
#include "tubenav/sensing.hpp"

namespace tubenav {

inline constexpr int kObsDim = 37;
inline constexpr int kNumActions = 36;

// Fixed layout: [lidar 9 | kinematics 15 | camera 5 | memory 5 | context 3].
struct Observation {
    std::array<double, kObsDim> values{};
};

// FNV-1a over the ordered component names; tests freeze the value so any
// accidental reordering of the layout fails loudly.
std::uint64_t observation_layout_hash();

enum class Terminal { running, success, failure, timeout };

enum class RewardRegime { visible, memorized, blind };

struct StepOutcome {
    Observation observation;
    double reward = 0.0;
    Terminal terminal = Terminal::running;
};

struct RewardContext {
    LidarFeatures features;
    TargetObservation target;
    DirectionalMemory memory;
    DroneState state;
    const TubeSpec* tube = nullptr;
    NearestPointResult nearest;
    int t = 0;
    int t_warmup = 20;
};

struct TrajectoryScores {
    double s_center = 0.0;
    double s_align = 0.0;
    double s_traj = 0.0;
};

RewardRegime regime_of(const RewardContext& ctx);
TrajectoryScores trajectory_scores(const RewardContext& ctx);
double front_weight(double c_turn); // 0.6 (1 - 0.4 c)
double rear_weight(double c_turn);  // 0.4 (1 + 0.4 c)
double warmup_bonus(double s_f, double s_r, double c_turn);
double compute_reward(const RewardContext& ctx);

struct ObservationParams {
    double v_max = 1.5;
    double radius = 1.0;
    double d_max = 5.0;
    double ell_safe = 0.5;
    int memory_horizon = 40;
    int t_max = 600;
    bool inside = true;
};

Observation build_observation(const RewardContext& ctx, const ObservationParams& params);

// One full perception pass (lidar rings, camera, memory update, observation)
// for an arbitrary pose inside a tube. `memory` is advanced in place. Used by
// the env step and by the physics-bridge driver, which gets its poses from the
// rigid-body plant instead of the kinematic step.
struct SenseResult {
    RewardContext ctx;
    Observation obs;
    TrajectoryScores scores;
    bool inside = true;
};

SenseResult sense_pipeline(const TubeSpec& tube, const DroneState& state, DirectionalMemory& memory,
                           int t, const WorkbenchConfig& cfg);

class CurriculumManager {
  public:
    CurriculumManager() = default;
    CurriculumManager(int window, double thr0, double thr1, double thr2)
        : window_size_(window), thresholds_{thr0, thr1, thr2} {}

    // Push one episode outcome; advance (and clear the window) when the full
    // window's success rate reaches the level threshold. Level never decreases.
    void record(Terminal outcome);

    int level() const { return level_; }
    int window_count() const { return static_cast<int>(window_.size()); }
    double window_success_rate() const;
    bool window_full() const { return static_cast<int>(window_.size()) == window_size_; }
    double threshold(int level) const { return thresholds_.at(level); }

    // Checkpoint support.
    std::deque<bool> window_contents() const { return window_; }
    void restore(int level, const std::deque<bool>& window);

  private:
    int level_ = 0;
    int window_size_ = 100;
    std::array<double, 3> thresholds_{0.85, 0.80, 0.80};
    std::deque<bool> window_;
};

CurriculumManager record_and_maybe_advance(CurriculumManager mgr, Terminal outcome);

// Per-step internals exposed for logging and evaluation.
struct StepInfo {
    int t = 0;
    Vec3 position;
    double d_perp = 0.0;
    double progression = 0.0; // arc length s
    double s_center = 0.0;
    double s_align = 0.0;
    double s_traj = 0.0;
    double c_turn = 0.0;
    RewardRegime regime = RewardRegime::visible;
    double reward = 0.0;
    bool inside = true;
    Terminal terminal = Terminal::running;
};

class TubeEnv {
  public:
    explicit TubeEnv(const WorkbenchConfig& cfg);

    Observation reset(int level, Rng& rng);
    Observation reset_seeded(int level, std::uint64_t seed);
    Observation reset_with_tube(TubeSpec tube);

    StepOutcome step(int action_index);
    StepOutcome step_continuous(const Vec3& commanded_dir_world, double commanded_speed);

    bool running() const { return terminal_ == Terminal::running; }
    Terminal terminal() const { return terminal_; }
    int time() const { return t_; }
    const TubeSpec& tube() const { return tube_; }
    const DroneState& drone() const { return state_; }
    const Observation& observation() const { return obs_; }
    const StepInfo& last_info() const { return info_; }
    const ActionSpace& action_space() const { return space_; }
    const WorkbenchConfig& config() const { return cfg_; }
    const RewardContext& context() const { return ctx_; }

  private:
    void sense_and_finish(bool with_reward);

    WorkbenchConfig cfg_;
    CameraIntrinsics intrinsics_;
    ActionSpace space_;
    TubeSpec tube_;
    DroneState state_;
    DirectionalMemory memory_;
    RewardContext ctx_;
    Observation obs_;
    StepInfo info_;
    int t_ = 0;
    Terminal terminal_ = Terminal::timeout; // not running until reset
};

CurriculumManager make_curriculum(const EnvConfig& cfg);

} // namespace tubenav

#endif
