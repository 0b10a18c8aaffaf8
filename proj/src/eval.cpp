#include "tubenav/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace tubenav {

const char* terminal_name(Terminal t) {
    switch (t) {
        case Terminal::running: return "running";
        case Terminal::success: return "success";
        case Terminal::failure: return "failure";
        case Terminal::timeout: return "timeout";
    }
    return "?";
}

const char* regime_name(RewardRegime r) {
    switch (r) {
        case RewardRegime::visible: return "visible";
        case RewardRegime::memorized: return "memorized";
        case RewardRegime::blind: return "blind";
    }
    return "?";
}

StepOutcome PolicyController::act(TubeEnv& env) {
    return env.step(greedy_action(*params_, env.observation()));
}

StepOutcome PurePursuitController::act(TubeEnv& env) {
    const auto [dir, speed] = pp_control(env.tube().centerline, env.drone(), cfg_);
    if (!discrete_) return env.step_continuous(dir, speed);
    return env.step(snap_to_action(env.drone(), env.action_space(), dir, speed));
}

std::string PurePursuitController::id() const {
    std::ostringstream os;
    os << "pp(L=" << cfg_.lookahead << (discrete_ ? "" : ",cont") << ")";
    return os.str();
}

EpisodeRecord run_episode(Controller& controller, TubeEnv& env, TubeSpec tube) {
    EpisodeRecord rec;
    rec.tube_seed = tube.seed;
    rec.level = tube.level;
    rec.controller = controller.id();
    env.reset_with_tube(std::move(tube));
    while (env.running()) {
        controller.act(env);
        const StepInfo& info = env.last_info();
        EpisodeStep step;
        step.t = info.t;
        step.position = info.position;
        step.d_perp_over_r = info.d_perp / env.tube().radius;
        step.s_align = info.s_align;
        step.regime = info.regime;
        step.reward = info.reward;
        step.c_turn = info.c_turn;
        step.inside = info.inside;
        rec.steps.push_back(step);
    }
    rec.terminal = env.terminal();
    return rec;
}

double quality_index(const EpisodeRecord& rec) {
    double centering = 0.0, alignment = 0.0;
    int n = 0;
    for (const auto& s : rec.steps) {
        if (!s.inside) continue;
        centering += 1.0 - s.d_perp_over_r;
        alignment += (s.s_align + 1.0) / 2.0;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("quality index undefined: no in-tube steps");
    return 0.5 * (centering / n) + 0.5 * (alignment / n);
}

void write_episode_record(const EpisodeRecord& rec, std::ostream& os) {
    os << "t,px,py,pz,d_perp_over_r,s_align,regime,reward,c_turn,terminal\n";
    os.precision(10);
    for (std::size_t i = 0; i < rec.steps.size(); ++i) {
        const auto& s = rec.steps[i];
        const bool last = i + 1 == rec.steps.size();
        os << s.t << ',' << s.position.x << ',' << s.position.y << ',' << s.position.z << ','
           << s.d_perp_over_r << ',' << s.s_align << ',' << regime_name(s.regime) << ',' << s.reward
           << ',' << s.c_turn << ',' << (last ? terminal_name(rec.terminal) : "running") << '\n';
    }
}

std::uint64_t paired_tube_seed(std::uint64_t base_seed, int level, int episode) {
    return base_seed + 1000003ull * static_cast<std::uint64_t>(level) + static_cast<std::uint64_t>(episode);
}

namespace {

ComparisonRow evaluate_controller_on_level(const WorkbenchConfig& cfg,
                                           const std::function<std::unique_ptr<Controller>()>& make,
                                           int level, const CompareOptions& opt) {
    ComparisonRow row;
    row.level = level;
    row.episodes = opt.n_episodes;
    row.seeds.resize(opt.n_episodes);

    std::vector<Terminal> outcomes(opt.n_episodes, Terminal::timeout);
    std::vector<double> qualities(opt.n_episodes, 0.0);

    int n_threads = opt.n_threads > 0 ? opt.n_threads : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::clamp(n_threads, 1, 8);

    std::atomic<int> next{0};
    auto work = [&]() {
        TubeEnv env(cfg);
        auto controller = make();
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= opt.n_episodes) return;
            const std::uint64_t seed = paired_tube_seed(opt.base_seed, level, i);
            TubeSpec tube = sample_curriculum_tube_seeded(level, seed, cfg.geometry);
            EpisodeRecord rec = run_episode(*controller, env, std::move(tube));
            outcomes[i] = rec.terminal;
            qualities[i] = quality_index(rec);
            row.seeds[i] = seed;
        }
    };
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    int wins = 0, exits = 0, timeouts = 0;
    double q = 0.0;
    for (int i = 0; i < opt.n_episodes; ++i) {
        if (outcomes[i] == Terminal::success) ++wins;
        if (outcomes[i] == Terminal::failure) ++exits;
        if (outcomes[i] == Terminal::timeout) ++timeouts;
        q += qualities[i];
    }
    row.success_pct = 100.0 * wins / opt.n_episodes;
    row.exit_pct = 100.0 * exits / opt.n_episodes;
    row.timeout_pct = 100.0 * timeouts / opt.n_episodes;
    row.quality = q / opt.n_episodes;
    return row;
}

bool better_row(const ComparisonRow& a, const ComparisonRow& b) {
    if (a.success_pct != b.success_pct) return a.success_pct > b.success_pct;
    if (a.exit_pct != b.exit_pct) return a.exit_pct < b.exit_pct;
    return a.quality > b.quality;
}

} // namespace

ComparisonTable compare(const WorkbenchConfig& cfg, const PolicyParams* policy,
                        const CompareOptions& opt) {
    if (opt.n_episodes < 1) throw std::invalid_argument("compare needs at least one episode");
    ComparisonTable table;

    std::vector<double> lookaheads;
    if (opt.pp_lookahead_sweep)
        lookaheads = {2.0 * cfg.geometry.radius, 3.0 * cfg.geometry.radius, 4.0 * cfg.geometry.radius,
                      6.0 * cfg.geometry.radius};
    else
        lookaheads = {cfg.pure_pursuit.lookahead_factor * cfg.geometry.radius};

    PurePursuitConfig pp_base;
    pp_base.lookahead = lookaheads.front();
    pp_base.speed_policy =
        cfg.pure_pursuit.speed_policy == "curvature_scaled" ? SpeedPolicy::curvature_scaled : SpeedPolicy::fixed;
    pp_base.v_cmd = cfg.pure_pursuit.v_cmd;
    pp_base.kappa_ref = cfg.pure_pursuit.kappa_ref;

    for (int level : opt.levels) {
        if (policy != nullptr) {
            ComparisonRow row = evaluate_controller_on_level(
                cfg, [&]() { return std::make_unique<PolicyController>(*policy); }, level, opt);
            row.controller = "ppo";
            table.rows.push_back(std::move(row));
        }
        std::optional<ComparisonRow> best;
        for (double L : lookaheads) {
            PurePursuitConfig pp = pp_base;
            pp.lookahead = L;
            ComparisonRow row = evaluate_controller_on_level(
                cfg, [&]() { return std::make_unique<PurePursuitController>(pp, !opt.pp_continuous); },
                level, opt);
            row.controller = PurePursuitController(pp, !opt.pp_continuous).id();
            if (!best || better_row(row, *best)) best = std::move(row);
        }
        table.rows.push_back(std::move(*best));
    }
    return table;
}

std::string table_to_csv(const ComparisonTable& table) {
    std::ostringstream os;
    os.precision(10);
    os << "controller,level,episodes,success_pct,exit_pct,timeout_pct,quality,seeds\n";
    for (const auto& r : table.rows) {
        os << r.controller << ',' << r.level << ',' << r.episodes << ',' << r.success_pct << ','
           << r.exit_pct << ',' << r.timeout_pct << ',' << r.quality << ',';
        for (std::size_t i = 0; i < r.seeds.size(); ++i) os << (i ? ";" : "") << r.seeds[i];
        os << '\n';
    }
    return os.str();
}

std::string table_to_text(const ComparisonTable& table) {
    std::ostringstream os;
    os << "controller          level  success%  exit%  timeout%  quality\n";
    for (const auto& r : table.rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-18s  %5d  %8.1f  %5.1f  %8.1f  %7.3f\n", r.controller.c_str(),
                      r.level, r.success_pct, r.exit_pct, r.timeout_pct, r.quality);
        os << buf;
    }
    return os.str();
}

void emit_plots(const std::string& metrics_csv_path, const std::string& out_dir) {
    std::ifstream f(metrics_csv_path);
    if (!f) throw std::runtime_error("cannot open metrics file: " + metrics_csv_path);
    std::string header;
    if (!std::getline(f, header)) throw std::runtime_error("metrics file is empty");

    // Resolve column positions from the header so reordering stays harmless.
    std::vector<std::string> cols;
    {
        std::istringstream hs(header);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    auto col = [&](const std::string& name) {
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return static_cast<int>(i);
        throw std::runtime_error("metrics file lacks column: " + name);
    };
    const int c_iter = col("iteration");
    const int c_level = col("level");
    const int c_succ = col("success_rate");
    const int c_ret = col("mean_return");

    struct Row {
        long iteration;
        int level;
        double success;
        double mean_return;
    };
    std::vector<Row> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<std::string> fields;
        std::string v;
        while (std::getline(ls, v, ',')) fields.push_back(v);
        Row r;
        r.iteration = std::stol(fields.at(c_iter));
        r.level = std::stoi(fields.at(c_level));
        r.success = std::stod(fields.at(c_succ));
        r.mean_return = std::stod(fields.at(c_ret));
        rows.push_back(r);
    }
    if (rows.empty()) throw std::runtime_error("metrics file has no data rows");

    std::filesystem::create_directories(out_dir);
    {
        std::ofstream out(out_dir + "/success_rate.csv");
        out << "iteration,success_rate\n";
        out.precision(10);
        for (const auto& r : rows) out << r.iteration << ',' << r.success << '\n';
    }
    {
        std::ofstream out(out_dir + "/mean_return.csv");
        out << "iteration,mean_return\n";
        out.precision(10);
        for (const auto& r : rows) out << r.iteration << ',' << r.mean_return << '\n';
    }
    {
        std::ofstream out(out_dir + "/level_transitions.csv");
        out << "iteration,from_level,to_level\n";
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].level != rows[i - 1].level)
                out << rows[i].iteration << ',' << rows[i - 1].level << ',' << rows[i].level << '\n';
    }
}

} // namespace tubenav
