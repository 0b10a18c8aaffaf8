#include "tubenav/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace tubenav {

void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 const std::vector<std::uint8_t>& dones, double bootstrap_value, double gamma,
                 double lambda_gae, std::vector<double>& advantages, std::vector<double>& returns) {
    const std::size_t n = rewards.size();
    if (values.size() != n || dones.size() != n) throw std::invalid_argument("gae: length mismatch");
    advantages.assign(n, 0.0);
    returns.assign(n, 0.0);
    double next_adv = 0.0;
    double next_value = bootstrap_value;
    for (std::size_t i = n; i-- > 0;) {
        const double nonterminal = dones[i] ? 0.0 : 1.0;
        const double delta = rewards[i] + gamma * next_value * nonterminal - values[i];
        next_adv = delta + gamma * lambda_gae * nonterminal * next_adv;
        advantages[i] = next_adv;
        returns[i] = next_adv + values[i];
        next_value = values[i];
    }
}

void normalize_advantages(std::vector<double>& adv) {
    if (adv.empty()) return;
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= adv.size();
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= adv.size();
    const double denom = std::sqrt(var) + 1e-8;
    for (double& a : adv) a = (a - mean) / denom;
}

namespace {

struct SampleStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clipped = 0.0;
    double kl = 0.0;
    double loss = 0.0;
};

// Gradient and loss terms for one transition, scaled by `scale` (1/minibatch).
SampleStats accumulate_sample(const PolicyParams& params, const RolloutBatch& batch, int idx,
                              const PpoConfig& hp, double scale, std::vector<double>& grad) {
    thread_local ForwardCache cache;
    thread_local std::vector<double> logp, dlogits;
    policy_forward(params, batch.obs.data() + static_cast<std::size_t>(idx) * batch.obs_dim, cache);
    log_softmax(cache.logits, logp);

    const int a = batch.actions[idx];
    const double lp = logp[a];
    const double ratio = std::exp(lp - batch.logp_old[idx]);
    const double adv = batch.advantages[idx];
    const double lo = 1.0 - hp.clip, hi = 1.0 + hp.clip;
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, lo, hi) * adv;
    const bool ratio_branch = unclipped <= clipped;
    const double surrogate = std::min(unclipped, clipped);

    const double h = entropy_from_log_probs(logp);
    const double verr = cache.value - batch.returns[idx];

    dlogits.assign(logp.size(), 0.0);
    for (std::size_t j = 0; j < logp.size(); ++j) {
        const double p = std::exp(logp[j]);
        double dl = hp.entropy_coef * p * (logp[j] + h); // from -entropy_coef * H
        if (ratio_branch) {
            const double indicator = (static_cast<int>(j) == a) ? 1.0 : 0.0;
            dl -= adv * ratio * (indicator - p);
        }
        dlogits[j] = dl * scale;
    }
    const double dvalue = 2.0 * hp.vf_coef * verr * scale;
    policy_backward(params, cache, dlogits.data(), dvalue, grad);

    SampleStats st;
    st.policy_loss = -surrogate;
    st.value_loss = verr * verr;
    st.entropy = h;
    st.clipped = std::abs(ratio - 1.0) > hp.clip ? 1.0 : 0.0;
    st.kl = batch.logp_old[idx] - lp;
    st.loss = -surrogate + hp.vf_coef * verr * verr - hp.entropy_coef * h;
    return st;
}

} // namespace

double ppo_loss_and_grad(const PolicyParams& params, const RolloutBatch& batch,
                         const std::vector<int>& rows, const PpoConfig& hp,
                         std::vector<double>* grad) {
    if (rows.empty()) throw std::invalid_argument("no rows selected");
    std::vector<double> scratch;
    std::vector<double>& g = grad ? *grad : scratch;
    g.assign(params.theta.size(), 0.0);
    const double scale = 1.0 / rows.size();
    double loss = 0.0;
    for (int idx : rows) loss += accumulate_sample(params, batch, idx, hp, scale, g).loss;
    return loss * scale;
}

UpdateStats ppo_update(PolicyParams& params, const RolloutBatch& batch, const PpoConfig& hp,
                       AdamState& opt, Rng& shuffle_rng, int n_threads) {
    const int n = batch.size();
    if (n == 0) throw std::invalid_argument("empty rollout batch");
    if (hp.minibatch <= 0 || n % hp.minibatch != 0)
        throw std::invalid_argument("minibatch must divide the batch size");
    n_threads = std::max(1, n_threads);

    const std::vector<double> theta_snapshot = params.theta;
    const AdamState opt_snapshot = opt;

    UpdateStats stats;
    double processed = 0.0;

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;

    std::vector<std::vector<double>> thread_grads(n_threads);
    std::vector<double> grad(params.theta.size(), 0.0);

    for (int epoch = 0; epoch < hp.epochs_per_iter; ++epoch) {
        for (int i = n - 1; i > 0; --i) { // Fisher-Yates with our own rng
            const int j = static_cast<int>(shuffle_rng.uniform_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[i], order[j]);
        }
        for (int start = 0; start < n; start += hp.minibatch) {
            const int mb = hp.minibatch;
            const double scale = 1.0 / mb;
            std::vector<SampleStats> thread_stats(n_threads);

            auto run_range = [&](int tid, int lo, int hi) {
                auto& g = thread_grads[tid];
                g.assign(params.theta.size(), 0.0);
                SampleStats acc;
                for (int k = lo; k < hi; ++k) {
                    const SampleStats st =
                        accumulate_sample(params, batch, order[start + k], hp, scale, g);
                    acc.policy_loss += st.policy_loss;
                    acc.value_loss += st.value_loss;
                    acc.entropy += st.entropy;
                    acc.clipped += st.clipped;
                    acc.kl += st.kl;
                    acc.loss += st.loss;
                }
                thread_stats[tid] = acc;
            };

            if (n_threads == 1) {
                run_range(0, 0, mb);
            } else {
                std::vector<std::thread> pool;
                const int chunk = (mb + n_threads - 1) / n_threads;
                for (int tid = 0; tid < n_threads; ++tid) {
                    const int lo = std::min(tid * chunk, mb);
                    const int hi = std::min(lo + chunk, mb);
                    pool.emplace_back(run_range, tid, lo, hi);
                }
                for (auto& th : pool) th.join();
            }

            std::fill(grad.begin(), grad.end(), 0.0);
            SampleStats mb_stats;
            for (int tid = 0; tid < n_threads; ++tid) { // fixed reduction order
                const auto& g = thread_grads[tid];
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
                mb_stats.policy_loss += thread_stats[tid].policy_loss;
                mb_stats.value_loss += thread_stats[tid].value_loss;
                mb_stats.entropy += thread_stats[tid].entropy;
                mb_stats.clipped += thread_stats[tid].clipped;
                mb_stats.kl += thread_stats[tid].kl;
                mb_stats.loss += thread_stats[tid].loss;
            }

            if (!std::isfinite(mb_stats.loss)) {
                params.theta = theta_snapshot;
                opt = opt_snapshot;
                stats.aborted = true;
                stats.abort_reason = "non-finite minibatch loss at epoch " + std::to_string(epoch);
                return stats;
            }

            opt.step(params.theta, grad, hp.lr);

            stats.policy_loss += mb_stats.policy_loss;
            stats.value_loss += mb_stats.value_loss;
            stats.entropy += mb_stats.entropy;
            stats.clip_fraction += mb_stats.clipped;
            stats.approx_kl += mb_stats.kl;
            processed += mb;
        }
    }

    if (!params.finite()) {
        params.theta = theta_snapshot;
        opt = opt_snapshot;
        stats.aborted = true;
        stats.abort_reason = "non-finite parameters after update";
        return stats;
    }

    stats.policy_loss /= processed;
    stats.value_loss /= processed;
    stats.entropy /= processed;
    stats.clip_fraction /= processed;
    stats.approx_kl /= processed;
    return stats;
}

// ---------------------------------------------------------------------------
// checkpoint container: little-endian, fixed section order
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'T', 'N', 'C', 'K', 'P', 'T', '0', '1'};

void put_bytes(std::ofstream& f, const void* p, std::size_t n) {
    f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void put_u64(std::ofstream& f, std::uint64_t v) { put_bytes(f, &v, 8); }
void put_i64(std::ofstream& f, std::int64_t v) { put_bytes(f, &v, 8); }
void put_i32(std::ofstream& f, std::int32_t v) { put_bytes(f, &v, 4); }
void put_f64(std::ofstream& f, double v) { put_bytes(f, &v, 8); }
void put_f64s(std::ofstream& f, const std::vector<double>& v) {
    put_u64(f, v.size());
    put_bytes(f, v.data(), v.size() * 8);
}
void put_str(std::ofstream& f, const std::string& s) {
    put_u64(f, s.size());
    put_bytes(f, s.data(), s.size());
}

void get_bytes(std::ifstream& f, void* p, std::size_t n) {
    f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!f) throw std::runtime_error("truncated checkpoint file");
}
std::uint64_t get_u64(std::ifstream& f) { std::uint64_t v; get_bytes(f, &v, 8); return v; }
std::int64_t get_i64(std::ifstream& f) { std::int64_t v; get_bytes(f, &v, 8); return v; }
std::int32_t get_i32(std::ifstream& f) { std::int32_t v; get_bytes(f, &v, 4); return v; }
double get_f64(std::ifstream& f) { double v; get_bytes(f, &v, 8); return v; }
std::vector<double> get_f64s(std::ifstream& f, std::uint64_t max_len = 1ull << 32) {
    const std::uint64_t n = get_u64(f);
    if (n > max_len) throw std::runtime_error("checkpoint vector too large");
    std::vector<double> v(n);
    get_bytes(f, v.data(), n * 8);
    return v;
}
std::string get_str(std::ifstream& f) {
    const std::uint64_t n = get_u64(f);
    if (n > (1ull << 24)) throw std::runtime_error("checkpoint string too large");
    std::string s(n, '\0');
    get_bytes(f, s.data(), n);
    return s;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    put_bytes(f, kMagic, 8);
    put_i32(f, ck.params.dims.obs);
    put_i32(f, ck.params.dims.h1);
    put_i32(f, ck.params.dims.h2);
    put_i32(f, ck.params.dims.actions);
    put_f64s(f, ck.params.theta);
    put_f64s(f, ck.params.norm.mean);
    put_f64s(f, ck.params.norm.m2);
    put_f64(f, ck.params.norm.count);

    put_f64(f, ck.hyper.lr);
    put_f64(f, ck.hyper.gamma);
    put_f64(f, ck.hyper.lambda_gae);
    put_f64(f, ck.hyper.clip);
    put_f64(f, ck.hyper.entropy_coef);
    put_f64(f, ck.hyper.vf_coef);
    put_i32(f, ck.hyper.epochs_per_iter);
    put_i32(f, ck.hyper.n_workers);
    put_i32(f, ck.hyper.train_batch);
    put_i32(f, ck.hyper.minibatch);
    put_i32(f, ck.hyper.rollout_len);
    put_u64(f, ck.hyper.seed);

    put_i32(f, ck.curriculum_level);
    put_u64(f, ck.curriculum_window.size());
    if (!ck.curriculum_window.empty())
        put_bytes(f, ck.curriculum_window.data(), ck.curriculum_window.size());

    put_u64(f, ck.rng_states.size());
    for (const auto& s : ck.rng_states) put_str(f, s);
    put_i64(f, ck.iteration);
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    get_bytes(f, magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("bad checkpoint magic");

    Checkpoint ck;
    ck.params.dims.obs = get_i32(f);
    ck.params.dims.h1 = get_i32(f);
    ck.params.dims.h2 = get_i32(f);
    ck.params.dims.actions = get_i32(f);
    ck.params.theta = get_f64s(f);
    if (ck.params.theta.size() != ck.params.dims.total())
        throw std::runtime_error("checkpoint weight count does not match dimensions");
    ck.params.norm = ObsNorm(ck.params.dims.obs);
    ck.params.norm.mean = get_f64s(f);
    ck.params.norm.m2 = get_f64s(f);
    ck.params.norm.count = get_f64(f);
    if (static_cast<int>(ck.params.norm.mean.size()) != ck.params.dims.obs ||
        static_cast<int>(ck.params.norm.m2.size()) != ck.params.dims.obs)
        throw std::runtime_error("checkpoint normalization size mismatch");

    ck.hyper.lr = get_f64(f);
    ck.hyper.gamma = get_f64(f);
    ck.hyper.lambda_gae = get_f64(f);
    ck.hyper.clip = get_f64(f);
    ck.hyper.entropy_coef = get_f64(f);
    ck.hyper.vf_coef = get_f64(f);
    ck.hyper.epochs_per_iter = get_i32(f);
    ck.hyper.n_workers = get_i32(f);
    ck.hyper.train_batch = get_i32(f);
    ck.hyper.minibatch = get_i32(f);
    ck.hyper.rollout_len = get_i32(f);
    ck.hyper.seed = get_u64(f);

    ck.curriculum_level = get_i32(f);
    const std::uint64_t wn = get_u64(f);
    if (wn > (1ull << 20)) throw std::runtime_error("checkpoint curriculum window too large");
    ck.curriculum_window.resize(wn);
    if (wn > 0) get_bytes(f, ck.curriculum_window.data(), wn);

    const std::uint64_t rn = get_u64(f);
    if (rn > (1ull << 16)) throw std::runtime_error("checkpoint rng count too large");
    ck.rng_states.resize(rn);
    for (auto& s : ck.rng_states) s = get_str(f);
    ck.iteration = get_i64(f);
    return ck;
}

// ---------------------------------------------------------------------------
// trainer
// ---------------------------------------------------------------------------

struct Trainer::Worker {
    explicit Worker(const WorkbenchConfig& cfg, std::uint64_t seed) : env(cfg), rng(seed) {}

    TubeEnv env;
    Rng rng;
    Observation obs;
    double episode_return = 0.0;
    bool needs_reset = true;

    // per-iteration segment
    std::vector<double> seg_obs;
    std::vector<int> seg_actions;
    std::vector<double> seg_logp, seg_rewards, seg_values;
    std::vector<std::uint8_t> seg_dones;
    double bootstrap = 0.0;
    std::vector<Terminal> outcomes;
    std::vector<double> episode_returns;

    void collect(const PolicyParams& params, int n_steps, int level) {
        seg_obs.clear();
        seg_actions.clear();
        seg_logp.clear();
        seg_rewards.clear();
        seg_values.clear();
        seg_dones.clear();
        outcomes.clear();
        episode_returns.clear();

        ForwardCache cache;
        for (int i = 0; i < n_steps; ++i) {
            if (needs_reset) {
                obs = env.reset(level, rng);
                episode_return = 0.0;
                needs_reset = false;
            }
            policy_forward(params, obs.values.data(), cache);
            double logp = 0.0;
            const int action = sample_action(cache.logits, rng, &logp);

            seg_obs.insert(seg_obs.end(), obs.values.begin(), obs.values.end());
            seg_actions.push_back(action);
            seg_logp.push_back(logp);
            seg_values.push_back(cache.value);

            const StepOutcome out = env.step(action);
            seg_rewards.push_back(out.reward);
            episode_return += out.reward;
            const bool done = out.terminal != Terminal::running;
            seg_dones.push_back(done ? 1 : 0);
            if (done) {
                outcomes.push_back(out.terminal);
                episode_returns.push_back(episode_return);
                needs_reset = true;
            } else {
                obs = out.observation;
            }
        }
        if (!seg_dones.empty() && !seg_dones.back()) {
            policy_forward(params, obs.values.data(), cache);
            bootstrap = cache.value;
        } else {
            bootstrap = 0.0;
        }
    }
};

Trainer::Trainer(const WorkbenchConfig& cfg, std::string out_dir)
    : cfg_(cfg), out_dir_(std::move(out_dir)), driver_rng_(cfg.ppo.seed) {
    const auto& hp = cfg_.ppo;
    if (hp.train_batch % hp.n_workers != 0)
        throw std::invalid_argument("train_batch must be divisible by n_workers");
    if (hp.train_batch % hp.minibatch != 0)
        throw std::invalid_argument("minibatch must divide train_batch");

    MlpDims dims;
    params_ = PolicyParams::init(dims, driver_rng_);
    curriculum_ = make_curriculum(cfg_.env);
    for (int w = 0; w < hp.n_workers; ++w)
        workers_.push_back(std::make_unique<Worker>(cfg_, hp.seed * 1000003ull + 17ull * (w + 1)));
    if (!out_dir_.empty()) {
        std::filesystem::create_directories(out_dir_);
        write_metrics_header();
    }
}

Trainer::Trainer(const Checkpoint& ck, const WorkbenchConfig& cfg, std::string out_dir)
    : Trainer(cfg, std::move(out_dir)) {
    params_ = ck.params;
    std::deque<bool> window;
    for (auto b : ck.curriculum_window) window.push_back(b != 0);
    curriculum_.restore(ck.curriculum_level, window);
    iteration_ = ck.iteration;
    if (!ck.rng_states.empty()) {
        driver_rng_.deserialize(ck.rng_states[0]);
        for (std::size_t w = 0; w + 1 < ck.rng_states.size() && w < workers_.size(); ++w)
            workers_[w]->rng.deserialize(ck.rng_states[w + 1]);
    }
}

Trainer::~Trainer() = default;

Checkpoint Trainer::make_checkpoint() const {
    Checkpoint ck;
    ck.params = params_;
    ck.hyper = cfg_.ppo;
    ck.curriculum_level = curriculum_.level();
    for (bool b : curriculum_.window_contents()) ck.curriculum_window.push_back(b ? 1 : 0);
    ck.rng_states.push_back(driver_rng_.serialize());
    for (const auto& w : workers_) ck.rng_states.push_back(w->rng.serialize());
    ck.iteration = iteration_;
    return ck;
}

void Trainer::write_metrics_header() {
    const std::string path = out_dir_ + "/metrics.csv";
    if (std::filesystem::exists(path)) return;
    std::ofstream f(path);
    f << "iteration,level,success_rate,mean_return,episodes,policy_loss,value_loss,entropy,"
         "clip_fraction,approx_kl,wall_seconds,gate_window_count,gate_success_rate\n";
}

void Trainer::append_metrics(const IterationLog& log) {
    if (out_dir_.empty()) return;
    std::ofstream f(out_dir_ + "/metrics.csv", std::ios::app);
    f.precision(10);
    f << log.iteration << ',' << log.level << ',' << log.success_rate << ',' << log.mean_return << ','
      << log.episodes << ',' << log.policy_loss << ',' << log.value_loss << ',' << log.entropy << ','
      << log.clip_fraction << ',' << log.approx_kl << ',' << log.wall_seconds << ','
      << log.gate_window_count << ',' << log.gate_success_rate << '\n';
}

std::string Trainer::write_checkpoint_files(std::int64_t iteration) {
    if (out_dir_.empty()) return "";
    const std::string latest = out_dir_ + "/ckpt_latest.bin";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "/ckpt_iter_%06lld.bin", static_cast<long long>(iteration));
    const std::string numbered = out_dir_ + buf;
    const Checkpoint ck = make_checkpoint();
    save_checkpoint(numbered, ck);
    save_checkpoint(latest, ck);
    return latest;
}

TrainResult Trainer::run(const StopCondition& stop,
                         const std::function<void(const IterationLog&)>& on_iteration) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& hp = cfg_.ppo;
    const int steps_per_worker = hp.train_batch / hp.n_workers;

    TrainResult result;
    RolloutBatch batch;

    auto target_met = [&]() {
        if (stop.target_level < 0) return false;
        if (curriculum_.level() < stop.target_level) return false;
        if (stop.target_success < 0.0) return true;
        return curriculum_.window_full() && curriculum_.window_success_rate() >= stop.target_success;
    };

    for (int it = 0; it < stop.max_iterations; ++it) {
        ++iteration_;
        const int level = curriculum_.level();

        if (hp.n_workers == 1) {
            workers_[0]->collect(params_, steps_per_worker, level);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(workers_.size());
            for (auto& w : workers_)
                pool.emplace_back([&params = params_, steps_per_worker, level, worker = w.get()] {
                    worker->collect(params, steps_per_worker, level);
                });
            for (auto& th : pool) th.join();
        }

        // Merge in worker order so the result does not depend on thread timing.
        batch.obs.clear();
        batch.actions.clear();
        batch.logp_old.clear();
        batch.rewards.clear();
        batch.values.clear();
        batch.dones.clear();
        batch.advantages.clear();
        batch.returns.clear();
        int episodes = 0;
        double return_sum = 0.0;
        std::vector<double> seg_adv, seg_ret;
        for (auto& w : workers_) {
            compute_gae(w->seg_rewards, w->seg_values, w->seg_dones, w->bootstrap, hp.gamma,
                        hp.lambda_gae, seg_adv, seg_ret);
            batch.obs.insert(batch.obs.end(), w->seg_obs.begin(), w->seg_obs.end());
            batch.actions.insert(batch.actions.end(), w->seg_actions.begin(), w->seg_actions.end());
            batch.logp_old.insert(batch.logp_old.end(), w->seg_logp.begin(), w->seg_logp.end());
            batch.rewards.insert(batch.rewards.end(), w->seg_rewards.begin(), w->seg_rewards.end());
            batch.values.insert(batch.values.end(), w->seg_values.begin(), w->seg_values.end());
            batch.dones.insert(batch.dones.end(), w->seg_dones.begin(), w->seg_dones.end());
            batch.advantages.insert(batch.advantages.end(), seg_adv.begin(), seg_adv.end());
            batch.returns.insert(batch.returns.end(), seg_ret.begin(), seg_ret.end());
            for (std::size_t e = 0; e < w->outcomes.size(); ++e) {
                curriculum_.record(w->outcomes[e]);
                metrics_window_.push_back(w->outcomes[e] == Terminal::success);
                if (metrics_window_.size() > 100) metrics_window_.pop_front();
                return_sum += w->episode_returns[e];
                ++episodes;
            }
        }

        params_.norm.update_batch(batch.obs.data(), batch.size(), batch.obs_dim);
        normalize_advantages(batch.advantages);
        const UpdateStats stats = ppo_update(params_, batch, hp, opt_, driver_rng_, hp.n_workers);

        IterationLog log;
        log.iteration = static_cast<int>(iteration_);
        log.level = curriculum_.level();
        int wins = 0;
        for (bool b : metrics_window_)
            if (b) ++wins;
        log.success_rate = metrics_window_.empty() ? 0.0 : static_cast<double>(wins) / metrics_window_.size();
        log.mean_return = episodes > 0 ? return_sum / episodes : 0.0;
        log.episodes = episodes;
        log.policy_loss = stats.policy_loss;
        log.value_loss = stats.value_loss;
        log.entropy = stats.entropy;
        log.clip_fraction = stats.clip_fraction;
        log.approx_kl = stats.approx_kl;
        log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.gate_window_count = curriculum_.window_count();
        log.gate_success_rate = curriculum_.window_success_rate();
        result.logs.push_back(log);
        append_metrics(log);
        if (on_iteration) on_iteration(log);

        const bool level_changed = curriculum_.level() != level;
        if (!out_dir_.empty() &&
            (level_changed || iteration_ % hp.checkpoint_every == 0 || stats.aborted))
            result.last_checkpoint = write_checkpoint_files(iteration_);

        if (target_met()) {
            result.reached_target = true;
            break;
        }
        if (stop.max_wall_seconds > 0.0 && log.wall_seconds >= stop.max_wall_seconds) break;
    }

    if (!out_dir_.empty()) result.last_checkpoint = write_checkpoint_files(iteration_);
    result.final_level = curriculum_.level();
    result.final_gate_success = curriculum_.window_success_rate();
    return result;
}

int greedy_action(const PolicyParams& params, const Observation& obs) {
    thread_local ForwardCache cache;
    policy_forward(params, obs.values.data(), cache);
    return argmax_action(cache.logits);
}

} // namespace tubenav
