#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tubenav/eval.hpp"
#include "tubenav/ppo.hpp"

using namespace tubenav;

namespace {

// Toy batch over a miniature network with every sample kept clear of the clip
// kinks so central differences are valid.
struct ToyProblem {
    MlpDims dims{5, 8, 6, 3};
    PolicyParams params;
    RolloutBatch batch;
    PpoConfig hp;

    explicit ToyProblem(std::uint64_t seed) {
        Rng rng(seed);
        params = PolicyParams::init(dims, rng);
        for (double& th : params.theta) th += 0.05 * rng.normal(); // break symmetry further

        hp.clip = 0.3;
        hp.vf_coef = 0.5;
        hp.entropy_coef = 0.003;

        const int n = 8;
        batch.obs_dim = dims.obs;
        ForwardCache cache;
        std::vector<double> logp;
        for (int i = 0; i < n; ++i) {
            std::vector<double> obs(dims.obs);
            for (double& v : obs) v = rng.uniform(-1, 1);
            policy_forward(params, obs.data(), cache);
            log_softmax(cache.logits, logp);
            const int action = rng.uniform_int(0, dims.actions - 1);

            // position the ratio away from 1-clip/1+clip and from the min-branch tie
            double ratio;
            do {
                ratio = rng.uniform(0.5, 1.6);
            } while (std::abs(ratio - (1.0 - hp.clip)) < 0.05 || std::abs(ratio - (1.0 + hp.clip)) < 0.05);

            batch.obs.insert(batch.obs.end(), obs.begin(), obs.end());
            batch.actions.push_back(action);
            batch.logp_old.push_back(logp[action] - std::log(ratio));
            batch.values.push_back(cache.value);
            batch.rewards.push_back(rng.uniform(-1, 1));
            batch.dones.push_back(0);
            batch.advantages.push_back(rng.uniform(-2, 2));
            batch.returns.push_back(rng.uniform(-2, 2));
        }
    }
};

} // namespace

TEST_CASE("zero-weight policy yields uniform logits and zero value") {
    MlpDims dims;
    PolicyParams params;
    params.dims = dims;
    params.theta.assign(dims.total(), 0.0);
    params.norm = ObsNorm(dims.obs);

    Observation obs;
    for (int i = 0; i < kObsDim; ++i) obs.values[i] = 0.1 * (i % 7) - 0.3;
    ForwardCache cache;
    policy_forward(params, obs.values.data(), cache);
    for (double l : cache.logits) CHECK(l == 0.0);
    CHECK(cache.value == 0.0);

    // determinism
    ForwardCache again;
    policy_forward(params, obs.values.data(), again);
    CHECK(cache.logits == again.logits);

    const double nan = std::nan("");
    Observation bad = obs;
    bad.values[3] = nan;
    CHECK_THROWS_AS(policy_forward(params, bad.values.data(), cache), std::invalid_argument);
}

TEST_CASE("softmax probabilities are normalized and sampling stays in range") {
    Rng rng(12);
    MlpDims dims;
    PolicyParams params = PolicyParams::init(dims, rng);
    Observation obs;
    for (int i = 0; i < kObsDim; ++i) obs.values[i] = rng.uniform(-1, 1);
    ForwardCache cache;
    policy_forward(params, obs.values.data(), cache);
    std::vector<double> logp;
    log_softmax(cache.logits, logp);
    double sum = 0.0;
    for (double lp : logp) sum += std::exp(lp);
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    for (int i = 0; i < 1000; ++i) {
        double lp = 0.0;
        const int a = sample_action(cache.logits, rng, &lp);
        CHECK(a >= 0);
        CHECK(a < kNumActions);
        CHECK(lp <= 0.0);
    }
}

TEST_CASE("full PPO loss gradient matches central finite differences") {
    ToyProblem toy(7);
    std::vector<int> rows;
    for (int i = 0; i < toy.batch.size(); ++i) rows.push_back(i);

    std::vector<double> grad;
    ppo_loss_and_grad(toy.params, toy.batch, rows, toy.hp, &grad);

    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < toy.params.theta.size(); i += 3) { // every third parameter
        PolicyParams p = toy.params;
        p.theta[i] += h;
        const double up = ppo_loss_and_grad(p, toy.batch, rows, toy.hp, nullptr);
        p.theta[i] -= 2 * h;
        const double dn = ppo_loss_and_grad(p, toy.batch, rows, toy.hp, nullptr);
        const double fd = (up - dn) / (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
        worst = std::max(worst, std::abs(fd - grad[i]) / denom);
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("gae base cases and the brute-force nested sum") {
    std::vector<double> adv, ret;

    compute_gae({1.0}, {0.0}, {1}, 0.0, 1.0, 1.0, adv, ret);
    CHECK(adv[0] == 1.0);
    CHECK(ret[0] == 1.0);

    compute_gae({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0, 0, 1}, 0.0, 0.99, 0.95, adv, ret);
    for (double a : adv) CHECK(a == 0.0);

    // random sequence vs the double-loop definition
    Rng rng(5);
    const int n = 50;
    std::vector<double> rewards(n), values(n);
    std::vector<std::uint8_t> dones(n, 0);
    for (int i = 0; i < n; ++i) {
        rewards[i] = rng.uniform(-1, 1);
        values[i] = rng.uniform(-1, 1);
        if (rng.uniform() < 0.1) dones[i] = 1;
    }
    const double bootstrap = rng.uniform(-1, 1);
    const double gamma = 0.99, lam = 0.95;
    compute_gae(rewards, values, dones, bootstrap, gamma, lam, adv, ret);

    for (int t = 0; t < n; ++t) {
        double expect = 0.0;
        double w = 1.0;
        for (int l = t; l < n; ++l) {
            const double next_v = (l + 1 < n) ? values[l + 1] : bootstrap;
            const double delta = rewards[l] + gamma * next_v * (dones[l] ? 0.0 : 1.0) - values[l];
            expect += w * delta;
            if (dones[l]) break;
            w *= gamma * lam;
        }
        CHECK(std::abs(adv[t] - expect) <= 1e-10);
        CHECK(std::abs(ret[t] - (adv[t] + values[t])) <= 1e-12);
    }
}

TEST_CASE("gae reduces to Monte Carlo at lambda 1 and to TD at lambda 0") {
    Rng rng(6);
    const int n = 30;
    std::vector<double> rewards(n), values(n);
    std::vector<std::uint8_t> dones(n, 0);
    dones[n - 1] = 1;
    for (int i = 0; i < n; ++i) {
        rewards[i] = rng.uniform(-1, 1);
        values[i] = rng.uniform(-1, 1);
    }
    const double gamma = 0.97;

    std::vector<double> adv, ret;
    compute_gae(rewards, values, dones, 0.0, gamma, 1.0, adv, ret);
    for (int t = 0; t < n; ++t) {
        double mc = 0.0, w = 1.0;
        for (int l = t; l < n; ++l) {
            mc += w * rewards[l];
            w *= gamma;
        }
        CHECK(std::abs(adv[t] - (mc - values[t])) <= 1e-10);
    }

    compute_gae(rewards, values, dones, 0.0, gamma, 0.0, adv, ret);
    for (int t = 0; t < n; ++t) {
        const double next_v = (t + 1 < n) ? values[t + 1] : 0.0;
        const double td = rewards[t] + gamma * next_v * (dones[t] ? 0.0 : 1.0) - values[t];
        CHECK(std::abs(adv[t] - td) <= 1e-12);
    }
}

TEST_CASE("advantage normalization gives zero mean and unit variance") {
    Rng rng(8);
    std::vector<double> adv(500);
    for (double& a : adv) a = rng.uniform(-3, 7);
    normalize_advantages(adv);
    double mean = 0.0, var = 0.0;
    for (double a : adv) mean += a;
    mean /= adv.size();
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= adv.size();
    CHECK(std::abs(mean) <= 1e-12);
    CHECK(std::abs(var - 1.0) <= 1e-6);
}

TEST_CASE("identity-ratio update reports zero clipping and the plain surrogate") {
    ToyProblem toy(9);
    // recompute logp_old to match the current policy exactly
    ForwardCache cache;
    std::vector<double> logp;
    for (int i = 0; i < toy.batch.size(); ++i) {
        policy_forward(toy.params, toy.batch.obs.data() + i * toy.dims.obs, cache);
        log_softmax(cache.logits, logp);
        toy.batch.logp_old[i] = logp[toy.batch.actions[i]];
        toy.batch.values[i] = cache.value;
    }
    PpoConfig hp = toy.hp;
    hp.lr = 0.0; // keep the policy frozen so every epoch sees ratio 1
    hp.epochs_per_iter = 2;
    hp.minibatch = toy.batch.size();
    hp.train_batch = toy.batch.size();
    AdamState opt;
    Rng shuffle(1);
    const UpdateStats stats = ppo_update(toy.params, toy.batch, hp, opt, shuffle, 1);
    CHECK_FALSE(stats.aborted);
    CHECK(stats.clip_fraction == 0.0);
    double mean_adv = 0.0;
    for (double a : toy.batch.advantages) mean_adv += a;
    mean_adv /= toy.batch.size();
    CHECK(stats.policy_loss == doctest::Approx(-mean_adv).epsilon(1e-9));
    CHECK(std::abs(stats.approx_kl) <= 1e-12);
}

TEST_CASE("a positive-advantage sample becomes more likely after an update") {
    ToyProblem toy(11);
    RolloutBatch single;
    single.obs_dim = toy.dims.obs;
    single.obs.assign(toy.batch.obs.begin(), toy.batch.obs.begin() + toy.dims.obs);
    single.actions = {toy.batch.actions[0]};
    ForwardCache cache;
    std::vector<double> logp;
    policy_forward(toy.params, single.obs.data(), cache);
    log_softmax(cache.logits, logp);
    single.logp_old = {logp[single.actions[0]]};
    single.values = {cache.value};
    single.rewards = {1.0};
    single.dones = {1};
    single.advantages = {2.0};
    single.returns = {1.0};

    PpoConfig hp = toy.hp;
    hp.lr = 1e-3;
    hp.epochs_per_iter = 5;
    hp.minibatch = 1;
    hp.train_batch = 1;
    AdamState opt;
    Rng shuffle(2);
    const double logp_before = single.logp_old[0];
    ppo_update(toy.params, single, hp, opt, shuffle, 1);
    policy_forward(toy.params, single.obs.data(), cache);
    log_softmax(cache.logits, logp);
    CHECK(logp[single.actions[0]] > logp_before);
}

TEST_CASE("entropy regularization keeps the policy flatter") {
    auto run = [](double ent_coef) {
        ToyProblem toy(13);
        PpoConfig hp = toy.hp;
        hp.entropy_coef = ent_coef;
        hp.lr = 5e-3;
        hp.epochs_per_iter = 20;
        hp.minibatch = toy.batch.size();
        hp.train_batch = toy.batch.size();
        AdamState opt;
        Rng shuffle(3);
        ppo_update(toy.params, toy.batch, hp, opt, shuffle, 1);
        ForwardCache cache;
        std::vector<double> logp;
        double h = 0.0;
        for (int i = 0; i < toy.batch.size(); ++i) {
            policy_forward(toy.params, toy.batch.obs.data() + i * toy.dims.obs, cache);
            log_softmax(cache.logits, logp);
            h += entropy_from_log_probs(logp);
        }
        return h / toy.batch.size();
    };
    CHECK(run(0.01) >= run(0.0));
}

TEST_CASE("surrogate contribution is flat beyond the clip range") {
    const double clip = 0.3, adv = 1.5;
    const double at_edge = std::min(1.3 * adv, std::clamp(1.3, 0.7, 1.3) * adv);
    for (double rho : {1.31, 1.5, 2.0, 5.0}) {
        const double surr = std::min(rho * adv, std::clamp(rho, 1.0 - clip, 1.0 + clip) * adv);
        CHECK(surr == at_edge);
    }
    for (double rho : {0.69, 0.5, 0.2}) {
        const double surr_neg = std::min(rho * -adv, std::clamp(rho, 1.0 - clip, 1.0 + clip) * -adv);
        CHECK(surr_neg == 0.7 * -adv);
    }
}

TEST_CASE("nan loss aborts the update and restores parameters") {
    ToyProblem toy(17);
    toy.batch.returns[2] = std::numeric_limits<double>::quiet_NaN();
    PpoConfig hp = toy.hp;
    hp.lr = 1e-3;
    hp.epochs_per_iter = 3;
    hp.minibatch = toy.batch.size();
    hp.train_batch = toy.batch.size();
    AdamState opt;
    Rng shuffle(4);
    const std::vector<double> before = toy.params.theta;
    const UpdateStats stats = ppo_update(toy.params, toy.batch, hp, opt, shuffle, 1);
    CHECK(stats.aborted);
    CHECK_FALSE(stats.abort_reason.empty());
    CHECK(toy.params.theta == before);
    CHECK(opt.t == 0);
}

TEST_CASE("running observation statistics converge on standard normal input") {
    const int n = 4000, dim = 4;
    ObsNorm norm(dim);
    Rng rng(23);
    std::vector<double> data(n * dim);
    for (double& v : data) v = rng.normal();
    // feed in several batches to exercise the merge
    for (int start = 0; start < n; start += 500)
        norm.update_batch(data.data() + start * dim, 500, dim);
    for (int j = 0; j < dim; ++j) {
        CHECK(std::abs(norm.mean[j]) <= 5.0 / std::sqrt(static_cast<double>(n)));
        CHECK(norm.variance(j) == doctest::Approx(1.0).epsilon(0.15));
    }
}

TEST_CASE("checkpoint round trip reproduces the greedy trajectory exactly") {
    WorkbenchConfig cfg;
    cfg.ppo.seed = 99;
    Trainer trainer(cfg, "");
    Checkpoint ck = trainer.make_checkpoint();
    ck.params.norm.update_batch(std::vector<double>(37 * 4, 0.25).data(), 4, 37); // non-trivial stats

    const std::string path = (std::filesystem::temp_directory_path() / "tn_test_ckpt.bin").string();
    save_checkpoint(path, ck);
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.params.theta == ck.params.theta);
    CHECK(loaded.params.norm.mean == ck.params.norm.mean);
    CHECK(loaded.params.norm.m2 == ck.params.norm.m2);
    CHECK(loaded.params.norm.count == ck.params.norm.count);
    CHECK(loaded.hyper.lr == ck.hyper.lr);
    CHECK(loaded.rng_states == ck.rng_states);

    TubeEnv env1(cfg), env2(cfg);
    env1.reset_seeded(0, 42);
    env2.reset_seeded(0, 42);
    for (int i = 0; i < 60 && env1.running() && env2.running(); ++i) {
        const int a1 = greedy_action(ck.params, env1.observation());
        const int a2 = greedy_action(loaded.params, env2.observation());
        REQUIRE(a1 == a2);
        env1.step(a1);
        env2.step(a2);
    }
    std::filesystem::remove(path);
}

TEST_CASE("corrupted checkpoints are rejected") {
    const std::string path = (std::filesystem::temp_directory_path() / "tn_bad_ckpt.bin").string();
    {
        std::ofstream f(path, std::ios::binary);
        f << "NOTACKPT-extra-bytes";
    }
    CHECK_THROWS(load_checkpoint(path));
    {
        std::ofstream f(path, std::ios::binary);
        f << "TNCKPT01"; // magic only, truncated body
    }
    CHECK_THROWS(load_checkpoint(path));
    std::filesystem::remove(path);
    CHECK_THROWS(load_checkpoint(path));
}

TEST_CASE("single-worker training run is reproducible") {
    WorkbenchConfig cfg;
    cfg.ppo.n_workers = 1;
    cfg.ppo.train_batch = 200;
    cfg.ppo.minibatch = 50;
    cfg.ppo.epochs_per_iter = 2;
    cfg.ppo.seed = 7;
    cfg.env.t_max = 120;

    auto run = [&]() {
        Trainer trainer(cfg, "");
        StopCondition stop;
        stop.max_iterations = 3;
        return trainer.run(stop);
    };
    const TrainResult a = run();
    const TrainResult b = run();
    REQUIRE(a.logs.size() == b.logs.size());
    for (std::size_t i = 0; i < a.logs.size(); ++i) {
        CHECK(a.logs[i].mean_return == b.logs[i].mean_return);
        CHECK(a.logs[i].policy_loss == b.logs[i].policy_loss);
        CHECK(a.logs[i].success_rate == b.logs[i].success_rate);
    }
}
