#ifndef TUBENAV_PPO_HPP
#define TUBENAV_PPO_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tubenav/config.hpp"
#include "tubenav/env.hpp"
#include "tubenav/mlp.hpp"

namespace tubenav {

struct RolloutBatch {
    int obs_dim = kObsDim;
    std::vector<double> obs; // raw observations, row-major [n][obs_dim]
    std::vector<int> actions;
    std::vector<double> logp_old;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<std::uint8_t> dones;
    std::vector<double> advantages;
    std::vector<double> returns;

    int size() const { return static_cast<int>(actions.size()); }
};

// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t
// A_t     = delta_t + gamma lambda (1 - done_t) A_{t+1}
// bootstrap_value stands in for V after the last row when it is not terminal.
void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 const std::vector<std::uint8_t>& dones, double bootstrap_value, double gamma,
                 double lambda_gae, std::vector<double>& advantages, std::vector<double>& returns);

void normalize_advantages(std::vector<double>& adv);

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    bool aborted = false;
    std::string abort_reason;
};

// Clipped-surrogate PPO epochs over shuffled minibatches. A non-finite loss
// aborts the whole update and restores the incoming parameters and optimizer.
UpdateStats ppo_update(PolicyParams& params, const RolloutBatch& batch, const PpoConfig& hp,
                       AdamState& opt, Rng& shuffle_rng, int n_threads = 1);

// Mean loss of the full PPO objective over the selected rows, plus (when grad
// is non-null) its parameter gradient. No optimizer involvement.
double ppo_loss_and_grad(const PolicyParams& params, const RolloutBatch& batch,
                         const std::vector<int>& rows, const PpoConfig& hp,
                         std::vector<double>* grad);

struct Checkpoint {
    PolicyParams params;
    PpoConfig hyper;
    int curriculum_level = 0;
    std::vector<std::uint8_t> curriculum_window;
    std::vector<std::string> rng_states;
    std::int64_t iteration = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

struct IterationLog {
    int iteration = 0;
    int level = 0;
    double success_rate = 0.0; // rolling window over recent episodes
    double mean_return = 0.0;  // episodes completed this iteration
    int episodes = 0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    double wall_seconds = 0.0;
    int gate_window_count = 0;
    double gate_success_rate = 0.0;
};

struct StopCondition {
    int max_iterations = 500;
    double max_wall_seconds = 0.0; // 0 = unbounded
    int target_level = -1;         // stop once the curriculum reaches this level...
    double target_success = -1.0;  // ...and its gating window is full at this rate (optional)
};

struct TrainResult {
    std::vector<IterationLog> logs;
    std::string last_checkpoint;
    int final_level = 0;
    double final_gate_success = 0.0;
    bool reached_target = false;
};

class Trainer {
  public:
    Trainer(const WorkbenchConfig& cfg, std::string out_dir);
    Trainer(const Checkpoint& ck, const WorkbenchConfig& cfg, std::string out_dir);
    ~Trainer();

    TrainResult run(const StopCondition& stop,
                    const std::function<void(const IterationLog&)>& on_iteration = nullptr);

    Checkpoint make_checkpoint() const;
    const PolicyParams& params() const { return params_; }
    const CurriculumManager& curriculum() const { return curriculum_; }

  private:
    struct Worker;

    void write_metrics_header();
    void append_metrics(const IterationLog& log);
    std::string write_checkpoint_files(std::int64_t iteration);

    WorkbenchConfig cfg_;
    std::string out_dir_;
    PolicyParams params_;
    AdamState opt_;
    CurriculumManager curriculum_;
    Rng driver_rng_;
    std::vector<std::unique_ptr<Worker>> workers_;
    std::deque<bool> metrics_window_; // rolling outcomes, never cleared
    std::int64_t iteration_ = 0;
};

// Greedy action for a raw observation (frozen normalization).
int greedy_action(const PolicyParams& params, const Observation& obs);

} // namespace tubenav

#endif
