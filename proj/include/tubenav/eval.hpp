#ifndef TUBENAV_EVAL_HPP
#define TUBENAV_EVAL_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tubenav/env.hpp"
#include "tubenav/ppo.hpp"
#include "tubenav/purepursuit.hpp"

namespace tubenav {

struct EpisodeStep {
    int t = 0;
    Vec3 position;
    double d_perp_over_r = 0.0;
    double s_align = 0.0;
    RewardRegime regime = RewardRegime::visible;
    double reward = 0.0;
    double c_turn = 0.0;
    bool inside = true;
};

struct EpisodeRecord {
    std::vector<EpisodeStep> steps;
    Terminal terminal = Terminal::timeout;
    std::uint64_t tube_seed = 0;
    int level = 0;
    std::string controller;
};

const char* terminal_name(Terminal t);
const char* regime_name(RewardRegime r);

// One env step per call; implementations choose the action.
class Controller {
  public:
    virtual ~Controller() = default;
    virtual StepOutcome act(TubeEnv& env) = 0;
    virtual std::string id() const = 0;
};

class PolicyController : public Controller {
  public:
    explicit PolicyController(const PolicyParams& params) : params_(&params) {}
    StepOutcome act(TubeEnv& env) override;
    std::string id() const override { return "ppo"; }

  private:
    const PolicyParams* params_;
};

class PurePursuitController : public Controller {
  public:
    PurePursuitController(const PurePursuitConfig& cfg, bool discrete) : cfg_(cfg), discrete_(discrete) {}
    StepOutcome act(TubeEnv& env) override;
    std::string id() const override;

  private:
    PurePursuitConfig cfg_;
    bool discrete_;
};

EpisodeRecord run_episode(Controller& controller, TubeEnv& env, TubeSpec tube);

// Equally weighted episode means of centering and rescaled alignment over
// in-tube steps: Q = mean(1 - d_perp/R)/2 + mean((S_align+1)/2)/2.
double quality_index(const EpisodeRecord& rec);

void write_episode_record(const EpisodeRecord& rec, std::ostream& os);

struct ComparisonRow {
    std::string controller;
    int level = 0;
    int episodes = 0;
    double success_pct = 0.0;
    double exit_pct = 0.0; // confinement loss (wall breach / tube exit)
    double timeout_pct = 0.0;
    double quality = 0.0; // mean per-episode Q
    std::vector<std::uint64_t> seeds;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;
};

struct CompareOptions {
    std::vector<int> levels{0, 1, 2};
    int n_episodes = 100;
    std::uint64_t base_seed = 0;
    bool pp_lookahead_sweep = false; // evaluate L in {2,3,4,6} R, keep the best per level
    bool pp_continuous = false;      // bypass the discrete snap (ablation)
    int n_threads = 0;               // 0 = hardware concurrency
};

// Paired comparison: every controller sees the same per-level tube seeds.
// policy may be null (baseline-only run).
ComparisonTable compare(const WorkbenchConfig& cfg, const PolicyParams* policy,
                        const CompareOptions& opt);

std::string table_to_csv(const ComparisonTable& table);
std::string table_to_text(const ComparisonTable& table);

// Columnar plot data from a training metrics CSV: success-rate and
// mean-return series plus the iterations where the curriculum advanced.
void emit_plots(const std::string& metrics_csv_path, const std::string& out_dir);

std::uint64_t paired_tube_seed(std::uint64_t base_seed, int level, int episode);

} // namespace tubenav

#endif
