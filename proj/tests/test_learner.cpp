#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dronesim/learner.hpp"
#include "dronesim/rng.hpp"
#include "oracles.hpp"

using namespace dronesim;

namespace {

PolicyParams toy_params(int obs = 3, int act = 2, int hidden = 4, std::uint64_t seed = 5) {
    return PolicyParams::create(obs, act, obs, hidden, -0.5, seed);
}

// Fill a buffer consistent with `params`: logp/value computed through the
// same code path as a rollout, so replaying yields ratio == 1 exactly.
RolloutBuffer consistent_buffer(PolicyParams& params, int T, int N, int A, Rng& rng) {
    RolloutBuffer buf;
    buf.resize(T, N, A, params.obs_dim, params.act_dim, params.obs_dim, false);
    const int rows = N * A;
    MlpCache ac, cc;
    std::vector<double> ls(params.act_dim);
    for (int j = 0; j < params.act_dim; ++j) {
        ls[j] = std::clamp(params.log_std[j], kLogStdMin, kLogStdMax);
    }
    for (int t = 0; t < T; ++t) {
        double* obs_t = buf.obs.data() + buf.sample(t, 0, 0) * params.obs_dim;
        for (int i = 0; i < rows * params.obs_dim; ++i) obs_t[i] = rng.normal();
        mlp_forward(params.actor, obs_t, rows, ac, nullptr);
        mlp_forward(params.critic, obs_t, rows, cc, nullptr);
        for (int r = 0; r < rows; ++r) {
            const std::size_t idx = buf.sample(t, 0, 0) + r;
            double* u = buf.u.data() + idx * params.act_dim;
            for (int j = 0; j < params.act_dim; ++j) {
                u[j] = ac.out.at(r, j) + std::exp(ls[j]) * rng.normal();
            }
            buf.logp[idx] = action_log_prob(ac.out.row(r), ls.data(), u, params.act_dim);
            buf.value[idx] = cc.out.at(r, 0);
            buf.reward[idx] = rng.normal();
        }
        for (int n = 0; n < N; ++n) {
            buf.done[static_cast<std::size_t>(t) * N + n] = rng.uniform01() < 0.1 ? 1 : 0;
        }
    }
    std::vector<double> boot(rows);
    for (auto& b : boot) b = rng.normal();
    compute_gae(buf, boot.data(), 0.99, 0.95);
    return buf;
}

}  // namespace

TEST_CASE("policy_forward: zero parameters give zero mean and value") {
    PolicyParams p = toy_params();
    p.for_each_tensor([](double* d, std::size_t n) { std::fill(d, d + n, 0.0); });
    p.log_std.assign(p.act_dim, -0.5);
    const double obs[6] = {0.3, -1.0, 2.0, 0.1, 0.2, 0.3};
    Mat mean, value;
    std::vector<double> ls;
    policy_forward(p, obs, 2, mean, ls, value, nullptr);
    for (int i = 0; i < 2; ++i) {
        CHECK(mean.at(i, 0) == 0.0);
        CHECK(mean.at(i, 1) == 0.0);
        CHECK(value.at(i, 0) == 0.0);
    }
    CHECK(ls[0] == -0.5);
}

TEST_CASE("policy_forward: duplicated observation rows give identical outputs") {
    PolicyParams p = toy_params();
    double obs[9];
    Rng rng(3);
    for (int i = 0; i < 3; ++i) obs[i] = rng.normal();
    std::memcpy(obs + 3, obs, 3 * sizeof(double));
    std::memcpy(obs + 6, obs, 3 * sizeof(double));
    Mat mean, value;
    std::vector<double> ls;
    policy_forward(p, obs, 3, mean, ls, value, nullptr);
    for (int r = 1; r < 3; ++r) {
        CHECK(mean.at(r, 0) == mean.at(0, 0));
        CHECK(mean.at(r, 1) == mean.at(0, 1));
        CHECK(value.at(r, 0) == value.at(0, 0));
    }
}

TEST_CASE("mlp gradients match central finite differences on a 4-unit net") {
    PolicyParams p = toy_params(3, 2, 4, 11);
    Mlp& net = p.actor;
    Rng rng(13);
    const int M = 5;
    std::vector<double> x(M * 3), C(M * 2);
    for (auto& v : x) v = rng.normal();
    for (auto& v : C) v = rng.normal();

    // L = Σ C ⊙ out
    MlpCache cache;
    auto loss = [&]() {
        mlp_forward(net, x.data(), M, cache, nullptr);
        double L = 0.0;
        for (int i = 0; i < M * 2; ++i) L += C[i] * cache.out.d[i];
        return L;
    };
    loss();
    MlpGrads grads;
    grads.match(net);
    MlpScratch scr;
    mlp_backward(net, cache, C.data(), grads, scr, nullptr);

    double worst = 0.0;
    auto check_tensor = [&](double* param, double* grad, std::size_t n) {
        for (std::size_t k = 0; k < n; k += 3) {  // sample every third entry
            const double fd = oracle::central_diff(loss, &param[k]);
            worst = std::max(worst, oracle::rel_err(grad[k], fd, 1e-6));
        }
    };
    check_tensor(net.l1.W.d.data(), grads.l1.W.d.data(), net.l1.W.size());
    check_tensor(net.l2.W.d.data(), grads.l2.W.d.data(), net.l2.W.size());
    check_tensor(net.l3.W.d.data(), grads.l3.W.d.data(), net.l3.W.size());
    check_tensor(net.head.W.d.data(), grads.head.W.d.data(), net.head.W.size());
    check_tensor(net.l1.b.data(), grads.l1.b.data(), net.l1.b.size());
    check_tensor(net.head.b.data(), grads.head.b.data(), net.head.b.size());
    CHECK(worst < 1e-4);
}

TEST_CASE("action_log_prob: gradients wrt mean, log-std and action match FD") {
    Rng rng(17);
    const int act = 3;
    double mean[3], ls[3], u[3];
    for (int j = 0; j < act; ++j) {
        mean[j] = rng.normal();
        ls[j] = -0.4 + 0.2 * rng.normal();
        u[j] = mean[j] + std::exp(ls[j]) * rng.normal();
    }
    auto lp = [&]() { return action_log_prob(mean, ls, u, act); };
    for (int j = 0; j < act; ++j) {
        const double s2 = std::exp(2.0 * ls[j]);
        const double d_mean = (u[j] - mean[j]) / s2;
        CHECK(oracle::rel_err(d_mean, oracle::central_diff(lp, &mean[j])) < 1e-6);
        const double d_ls = (u[j] - mean[j]) * (u[j] - mean[j]) / s2 - 1.0;
        CHECK(oracle::rel_err(d_ls, oracle::central_diff(lp, &ls[j])) < 1e-6);
        // action derivative includes the tanh squash correction term
        const double th = std::tanh(u[j]);
        const double sech2 = 1.0 - th * th;
        const double d_u = -(u[j] - mean[j]) / s2 + 2.0 * th * sech2 / (sech2 + 1e-8);
        CHECK(oracle::rel_err(d_u, oracle::central_diff(lp, &u[j])) < 1e-6);
    }
}

TEST_CASE("gae: lambda 0 reduces to the TD residual") {
    RolloutBuffer buf;
    buf.resize(4, 1, 1, 1, 1, 1, false);
    Rng rng(19);
    for (int t = 0; t < 4; ++t) {
        buf.reward[t] = rng.normal();
        buf.value[t] = rng.normal();
        buf.done[t] = t == 2 ? 1 : 0;
    }
    const double boot = 0.7;
    compute_gae(buf, &boot, 0.9, 0.0);
    for (int t = 0; t < 4; ++t) {
        const double v_next = t == 3 ? boot : buf.value[t + 1];
        const double nonterm = buf.done[t] ? 0.0 : 1.0;
        const double delta = buf.reward[t] + 0.9 * v_next * nonterm - buf.value[t];
        CHECK(buf.adv[t] == doctest::Approx(delta).epsilon(1e-15));
        CHECK(buf.ret[t] == doctest::Approx(delta + buf.value[t]).epsilon(1e-15));
    }
}

TEST_CASE("gae: gamma=lambda=1 with zero values gives suffix sums") {
    RolloutBuffer buf;
    buf.resize(5, 1, 1, 1, 1, 1, false);
    const double r[5] = {1, 2, 3, 4, 5};
    for (int t = 0; t < 5; ++t) buf.reward[t] = r[t];
    const double boot = 0.0;
    compute_gae(buf, &boot, 1.0, 1.0);
    double suffix = 0.0;
    for (int t = 4; t >= 0; --t) {
        suffix += r[t];
        CHECK(buf.adv[t] == doctest::Approx(suffix).epsilon(1e-15));
    }
}

TEST_CASE("gae: matches the brute-force double-loop oracle at T=5, N=2") {
    RolloutBuffer buf;
    buf.resize(5, 2, 1, 1, 1, 1, false);
    Rng rng(23);
    std::vector<std::vector<double>> rewards(2, std::vector<double>(5));
    std::vector<std::vector<double>> values(2, std::vector<double>(5));
    std::vector<std::vector<int>> dones(2, std::vector<int>(5, 0));
    for (int n = 0; n < 2; ++n) {
        for (int t = 0; t < 5; ++t) {
            rewards[n][t] = rng.normal();
            values[n][t] = rng.normal();
            dones[n][t] = rng.uniform01() < 0.25 ? 1 : 0;
            buf.reward[buf.sample(t, n, 0)] = rewards[n][t];
            buf.value[buf.sample(t, n, 0)] = values[n][t];
            buf.done[static_cast<std::size_t>(t) * 2 + n] = dones[n][t];
        }
    }
    const double boot[2] = {0.4, -0.6};
    const double gamma = 0.97, lambda = 0.88;
    compute_gae(buf, boot, gamma, lambda);
    for (int n = 0; n < 2; ++n) {
        const auto want = oracle::gae_brute_force(rewards[n], values[n], dones[n], boot[n],
                                                  gamma, lambda);
        for (int t = 0; t < 5; ++t) {
            CHECK(std::abs(buf.adv[buf.sample(t, n, 0)] - want[t]) < 1e-12);
        }
    }
}

TEST_CASE("ppo_loss: full-parameter gradient matches central finite differences") {
    PolicyParams p = toy_params(3, 2, 4, 29);
    Rng rng(31);
    const int M = 16;
    std::vector<double> obs(M * 3), u(M * 2), adv(M), ret(M), logp_old(M);
    for (auto& v : obs) v = rng.normal();
    MlpCache ac;
    mlp_forward(p.actor, obs.data(), M, ac, nullptr);
    std::vector<double> ls(2);
    for (int j = 0; j < 2; ++j) ls[j] = std::clamp(p.log_std[j], kLogStdMin, kLogStdMax);
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < 2; ++j) {
            u[i * 2 + j] = ac.out.at(i, j) + std::exp(ls[j]) * rng.normal();
        }
        logp_old[i] = action_log_prob(ac.out.row(i), ls.data(), &u[i * 2], 2);
        adv[i] = rng.normal();
        ret[i] = rng.normal();
    }
    normalize_advantages(adv.data(), M);

    Minibatch mb{obs.data(), nullptr, u.data(), adv.data(), ret.data(), logp_old.data(), M};
    PpoConfig cfg;
    auto loss = [&]() { return ppo_loss(p, mb, cfg, nullptr, nullptr, nullptr); };
    PolicyGrads grads;
    grads.match(p);
    UpdateStats st;
    ppo_loss(p, mb, cfg, &grads, &st, nullptr);

    // iterate the parameter spans of params and grads in lockstep
    std::vector<std::pair<double*, std::size_t>> pt, gt;
    p.for_each_tensor([&](double* d, std::size_t n) { pt.emplace_back(d, n); });
    grads.for_each_tensor([&](double* d, std::size_t n) { gt.emplace_back(d, n); });
    REQUIRE(pt.size() == gt.size());
    double worst = 0.0;
    for (std::size_t s = 0; s < pt.size(); ++s) {
        REQUIRE(pt[s].second == gt[s].second);
        for (std::size_t k = 0; k < pt[s].second; k += 5) {
            const double fd = oracle::central_diff(loss, &pt[s].first[k]);
            worst = std::max(worst, oracle::rel_err(gt[s].first[k], fd, 1e-6));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("normalize_advantages: zero mean, unit std") {
    Rng rng(37);
    std::vector<double> a(4096);
    for (auto& v : a) v = 3.0 + 2.5 * rng.normal();
    normalize_advantages(a.data(), static_cast<int>(a.size()));
    double m = 0.0;
    for (double v : a) m += v;
    m /= a.size();
    double var = 0.0;
    for (double v : a) var += (v - m) * (v - m);
    const double sd = std::sqrt(var / a.size());
    CHECK(std::abs(m) < 1e-10);
    CHECK(std::abs(sd - 1.0) < 1e-10);
}

TEST_CASE("ppo_update: deterministic replay has ratio 1 and zero clip fraction") {
    PolicyParams p = toy_params(3, 2, 8, 41);
    Rng rng(43);
    RolloutBuffer buf = consistent_buffer(p, 4, 8, 1, rng);
    PpoConfig cfg;
    cfg.epochs = 1;
    cfg.minibatches = 1;
    AdamState adam;
    adam.match(p.param_count());
    Rng order(1);

    // expected surrogate at ratio == 1: −mean(normalized advantages)
    std::vector<double> adv(buf.adv);
    normalize_advantages(adv.data(), static_cast<int>(adv.size()));
    double want = 0.0;
    for (double v : adv) want -= v;
    want /= static_cast<double>(adv.size());

    const UpdateStats st = ppo_update(p, adam, buf, cfg, order, nullptr);
    CHECK(!st.aborted);
    CHECK(st.first_clip_frac == 0.0);
    CHECK(std::abs(st.policy_loss - want) < 1e-12);
}

TEST_CASE("ppo_update: clip 0 freezes the actor for off-ratio samples") {
    PolicyParams p = toy_params(3, 2, 8, 47);
    Rng rng(53);
    RolloutBuffer buf = consistent_buffer(p, 4, 8, 1, rng);
    for (auto& lp : buf.logp) lp += 0.1;  // every ratio becomes e^{-0.1} != 1
    PpoConfig cfg;
    cfg.clip_eps = 1e-12;  // degenerate band
    cfg.epochs = 1;
    cfg.minibatches = 2;
    AdamState adam;
    adam.match(p.param_count());
    Rng order(1);
    const std::vector<double> w_before = p.actor.l1.W.d;
    const std::vector<double> b_before = p.critic.l1.b;
    const UpdateStats st = ppo_update(p, adam, buf, cfg, order, nullptr);
    CHECK(!st.aborted);
    CHECK(st.clip_frac == 1.0);
    CHECK(p.actor.l1.W.d == w_before);   // no policy gradient reached the actor
    CHECK(p.critic.l1.b != b_before);    // the value loss still trains the critic
}

TEST_CASE("ppo_update: permuting the agent axis leaves parameters bit-identical") {
    PolicyParams p0 = toy_params(4, 2, 8, 59);
    Rng rng(61);
    RolloutBuffer buf = consistent_buffer(p0, 3, 4, 3, rng);

    RolloutBuffer perm = buf;  // apply agent permutation (2,0,1)
    const int A = 3, map[3] = {2, 0, 1};
    for (int t = 0; t < buf.T; ++t) {
        for (int n = 0; n < buf.N; ++n) {
            for (int a = 0; a < A; ++a) {
                const std::size_t src = buf.sample(t, n, map[a]);
                const std::size_t dst = buf.sample(t, n, a);
                std::memcpy(perm.obs.data() + dst * buf.obs_dim,
                            buf.obs.data() + src * buf.obs_dim,
                            sizeof(double) * buf.obs_dim);
                std::memcpy(perm.u.data() + dst * buf.act_dim,
                            buf.u.data() + src * buf.act_dim, sizeof(double) * buf.act_dim);
                perm.logp[dst] = buf.logp[src];
                perm.reward[dst] = buf.reward[src];
                perm.value[dst] = buf.value[src];
                perm.adv[dst] = buf.adv[src];
                perm.ret[dst] = buf.ret[src];
            }
        }
    }

    PpoConfig cfg;
    cfg.epochs = 2;
    cfg.minibatches = 3;
    PolicyParams pa = p0, pb = p0;
    AdamState aa, ab;
    aa.match(p0.param_count());
    ab.match(p0.param_count());
    Rng o1(7), o2(7);
    ppo_update(pa, aa, buf, cfg, o1, nullptr);
    ppo_update(pb, ab, perm, cfg, o2, nullptr);
    bool same = true;
    std::vector<std::pair<double*, std::size_t>> ta, tb;
    pa.for_each_tensor([&](double* d, std::size_t n) { ta.emplace_back(d, n); });
    pb.for_each_tensor([&](double* d, std::size_t n) { tb.emplace_back(d, n); });
    for (std::size_t s = 0; s < ta.size(); ++s) {
        same = same && std::memcmp(ta[s].first, tb[s].first,
                                   ta[s].second * sizeof(double)) == 0;
    }
    CHECK(same);
}

TEST_CASE("ppo_update: worker count does not change the result") {
    PolicyParams p0 = toy_params(5, 3, 16, 67);
    Rng rng(71);
    RolloutBuffer buf = consistent_buffer(p0, 4, 16, 1, rng);
    PpoConfig cfg;
    PolicyParams pa = p0, pb = p0;
    AdamState aa, ab;
    aa.match(p0.param_count());
    ab.match(p0.param_count());
    Rng o1(9), o2(9);
    ThreadPool pool2(2);
    ppo_update(pa, aa, buf, cfg, o1, nullptr);
    ppo_update(pb, ab, buf, cfg, o2, &pool2);
    CHECK(pa.actor.l1.W.d == pb.actor.l1.W.d);
    CHECK(pa.critic.head.W.d == pb.critic.head.W.d);
    CHECK(pa.log_std == pb.log_std);
}

TEST_CASE("ppo_update: non-finite loss aborts and restores parameters") {
    PolicyParams p0 = toy_params(3, 2, 8, 73);
    Rng rng(79);
    RolloutBuffer buf = consistent_buffer(p0, 4, 8, 1, rng);
    buf.logp[3] = std::numeric_limits<double>::quiet_NaN();
    PpoConfig cfg;
    PolicyParams p = p0;
    AdamState adam;
    adam.match(p.param_count());
    Rng order(1);
    const UpdateStats st = ppo_update(p, adam, buf, cfg, order, nullptr);
    CHECK(st.aborted);
    CHECK(p.actor.l1.W.d == p0.actor.l1.W.d);
    CHECK(p.log_std == p0.log_std);
    CHECK(adam.t == 0);
}

TEST_CASE("policy checkpoint: save/load round trip is exact") {
    PolicyParams p = toy_params(6, 3, 8, 83);
    p.obs_norm.mean[2] = 1.5;
    p.obs_norm.var[4] = 3.0;
    p.obs_norm.count = 777.0;
    const std::string path = "/tmp/dsim_test_ckpt.bin";
    save_policy(path, p, 123456);
    std::int64_t step = 0;
    PolicyParams q = load_policy(path, &step);
    CHECK(step == 123456);
    CHECK(q.obs_dim == 6);
    CHECK(q.act_dim == 3);
    CHECK(q.actor.l1.W.d == p.actor.l1.W.d);
    CHECK(q.critic.l3.b == p.critic.l3.b);
    CHECK(q.log_std == p.log_std);
    CHECK(q.obs_norm.mean == p.obs_norm.mean);
    CHECK(q.obs_norm.var == p.obs_norm.var);
    CHECK(q.obs_norm.count == p.obs_norm.count);
    std::filesystem::remove(path);
}

TEST_CASE("train: short runs are bit-identical and resume continues the curve") {
    const std::string text =
        "task = hover\ndrone = hummingbird\nnum_envs = 8\nppo.rollout = 4\nepisode_len = 50\n";
    Scenario sc = load_scenario(Config::parse_text(text));
    TrainOptions opts;
    opts.total_steps = 8 * 4 * 3;  // three iterations
    opts.seed = 99;
    opts.final_eval_episodes = 4;
    const TrainResult r1 = train(sc, opts, nullptr);
    const TrainResult r2 = train(sc, opts, nullptr);
    REQUIRE(r1.curve.size() == 3);
    REQUIRE(r2.curve.size() == 3);
    for (std::size_t i = 0; i < r1.curve.size(); ++i) {
        CHECK(r1.curve[i].mean_return == r2.curve[i].mean_return);
        CHECK(r1.curve[i].policy_loss == r2.curve[i].policy_loss);
        CHECK(r1.curve[i].grad_norm == r2.curve[i].grad_norm);
    }
    CHECK(r1.final_eval.mean_return == r2.final_eval.mean_return);

    // resume: fresh out dir, then continue; the step column must be gapless
    const std::string dir = "/tmp/dsim_train_test";
    std::filesystem::remove_all(dir);
    TrainOptions o1 = opts;
    o1.out_dir = dir;
    (void)train(sc, o1, nullptr);
    TrainOptions o2 = opts;
    o2.out_dir = dir;
    o2.resume_checkpoint = dir + "/ckpt_final.bin";
    (void)train(sc, o2, nullptr);
    std::ifstream f(dir + "/curve.csv");
    REQUIRE(f.good());
    std::string line;
    std::getline(f, line);  // header
    long long prev = 0;
    int rows = 0;
    while (std::getline(f, line)) {
        const long long step = std::stoll(line.substr(0, line.find(',')));
        CHECK(step == prev + 8 * 4);
        prev = step;
        ++rows;
    }
    CHECK(rows == 6);
    std::filesystem::remove_all(dir);
}
