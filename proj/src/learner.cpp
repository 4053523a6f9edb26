#include "dronesim/learner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <stdexcept>

namespace dronesim {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2π)
constexpr double kHalfLog2PiE = 1.4189385332046727;  // 0.5·log(2πe)
}  // namespace

void RolloutBuffer::resize(int T_, int N_, int A_, int obs_dim_, int act_dim_, int critic_dim_,
                           bool centralized_critic) {
    T = T_;
    N = N_;
    A = A_;
    obs_dim = obs_dim_;
    act_dim = act_dim_;
    critic_dim = critic_dim_;
    const std::size_t rows = static_cast<std::size_t>(T) * N * A;
    obs.assign(rows * obs_dim, 0.0);
    critic_obs.assign(centralized_critic ? rows * critic_dim : 0, 0.0);
    u.assign(rows * act_dim, 0.0);
    logp.assign(rows, 0.0);
    reward.assign(rows, 0.0);
    value.assign(rows, 0.0);
    done.assign(static_cast<std::size_t>(T) * N, 0);
    adv.assign(rows, 0.0);
    ret.assign(rows, 0.0);
}

void compute_gae(RolloutBuffer& buf, const double* bootstrap_value, double gamma, double lambda) {
    for (int n = 0; n < buf.N; ++n) {
        for (int a = 0; a < buf.A; ++a) {
            double acc = 0.0;
            for (int t = buf.T - 1; t >= 0; --t) {
                const std::size_t i = buf.sample(t, n, a);
                const double nonterm =
                    buf.done[static_cast<std::size_t>(t) * buf.N + n] ? 0.0 : 1.0;
                const double v_next = t == buf.T - 1
                                          ? bootstrap_value[static_cast<std::size_t>(n) * buf.A + a]
                                          : buf.value[buf.sample(t + 1, n, a)];
                const double delta =
                    buf.reward[i] + gamma * v_next * nonterm - buf.value[i];
                acc = delta + gamma * lambda * nonterm * acc;
                buf.adv[i] = acc;
                buf.ret[i] = acc + buf.value[i];
            }
        }
    }
}

double action_log_prob(const double* mean, const double* log_std_clamped, const double* u,
                       int act_dim) {
    double lp = 0.0;
    for (int j = 0; j < act_dim; ++j) {
        const double s = std::exp(log_std_clamped[j]);
        const double z = (u[j] - mean[j]) / s;
        lp += -0.5 * z * z - log_std_clamped[j] - 0.5 * kLog2Pi;
        const double th = std::tanh(u[j]);
        lp -= std::log(1.0 - th * th + 1e-8);  // squash correction
    }
    return lp;
}

double gaussian_entropy(const double* log_std_clamped, int act_dim) {
    double h = 0.0;
    for (int j = 0; j < act_dim; ++j) h += log_std_clamped[j] + kHalfLog2PiE;
    return h;
}

namespace {

void clamp_log_std(const std::vector<double>& p, std::vector<double>& out) {
    out.resize(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) out[j] = std::clamp(p[j], kLogStdMin, kLogStdMax);
}

struct SpanList {
    std::vector<std::pair<double*, std::size_t>> spans;
    template <class T>
    void build(T& obj) {
        spans.clear();
        obj.for_each_tensor([&](double* d, std::size_t n) { spans.emplace_back(d, n); });
    }
};

}  // namespace


void normalize_advantages(double* adv, int n) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += adv[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = adv[i] - mean;
        var += d * d;
    }
    const double std = std::sqrt(var / n);
    const double denom = std > 1e-8 ? std : 1e-8;
    for (int i = 0; i < n; ++i) adv[i] = (adv[i] - mean) / denom;
}

double ppo_loss(const PolicyParams& params, const Minibatch& mb, const PpoConfig& cfg,
                PolicyGrads* grads, UpdateStats* stats, ThreadPool* pool) {
    static thread_local MlpCache a_cache, c_cache;
    static thread_local MlpScratch a_scr, c_scr;
    static thread_local Mat dmean, dvalue;
    const int M = mb.rows;
    const int act = params.act_dim;

    mlp_forward(params.actor, mb.obs, M, a_cache, pool);
    mlp_forward(params.critic, mb.critic_obs != nullptr ? mb.critic_obs : mb.obs, M, c_cache,
                pool);

    std::vector<double> ls;
    clamp_log_std(params.log_std, ls);
    std::vector<double> sigma(act), inv_var(act), dls(act, 0.0);
    for (int j = 0; j < act; ++j) {
        sigma[j] = std::exp(ls[j]);
        inv_var[j] = 1.0 / (sigma[j] * sigma[j]);
    }
    dmean.resize(M, act);
    dvalue.resize(M, 1);

    double policy_loss = 0.0, value_loss = 0.0;
    int clipped = 0;
    for (int i = 0; i < M; ++i) {
        const double* mu = a_cache.out.row(i);
        const double* ui = mb.u + static_cast<std::size_t>(i) * act;
        const double lp_new = action_log_prob(mu, ls.data(), ui, act);
        const double ratio = std::exp(lp_new - mb.logp_old[i]);
        const double r_clip = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        const bool in_band = ratio >= 1.0 - cfg.clip_eps && ratio <= 1.0 + cfg.clip_eps;
        if (!in_band) ++clipped;
        policy_loss -= r_clip * mb.adv[i];
        // d(−clip(r)·A)/dlogp = −r·A inside the band, 0 outside
        const double G = in_band ? -mb.adv[i] * ratio / M : 0.0;
        double* dm = dmean.row(i);
        for (int j = 0; j < act; ++j) {
            dm[j] = G * (ui[j] - mu[j]) * inv_var[j];  // dlogp/dμ_j = (u−μ)/σ²
            dls[j] += G * ((ui[j] - mu[j]) * (ui[j] - mu[j]) * inv_var[j] - 1.0);
        }
        const double v = c_cache.out.at(i, 0);
        const double diff = v - mb.ret[i];
        value_loss += diff * diff;
        dvalue.at(i, 0) = cfg.value_coef * 2.0 * diff / M;
    }
    policy_loss /= M;
    value_loss /= M;
    const double entropy = gaussian_entropy(ls.data(), act);
    for (int j = 0; j < act; ++j) {
        dls[j] -= cfg.entropy_coef;  // L −= c_e·H, H is state-independent
        if (params.log_std[j] <= kLogStdMin || params.log_std[j] >= kLogStdMax) dls[j] = 0.0;
    }

    if (grads != nullptr) {
        grads->zero();
        mlp_backward(params.actor, a_cache, dmean.d.data(), grads->actor, a_scr, pool);
        mlp_backward(params.critic, c_cache, dvalue.d.data(), grads->critic, c_scr, pool);
        grads->log_std = dls;
    }
    if (stats != nullptr) {
        stats->policy_loss = policy_loss;
        stats->value_loss = value_loss;
        stats->entropy = entropy;
        stats->clip_frac = static_cast<double>(clipped) / M;
    }
    return policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy;
}

UpdateStats ppo_update(PolicyParams& params, AdamState& adam, const RolloutBuffer& buf,
                       const PpoConfig& cfg, Rng& order_rng, ThreadPool* pool) {
    UpdateStats st;
    const int T = buf.T, N = buf.N, A = buf.A;
    const int groups = T * N;
    const int act = buf.act_dim;
    const bool central = buf.centralized();

    // Canonical agent order: minibatch composition and accumulation order
    // depend only on slot content, so permuting the agent axis of the buffer
    // cannot change the update.
    std::vector<int> agent_order(A);
    std::iota(agent_order.begin(), agent_order.end(), 0);
    if (A > 1) {
        auto content_less = [&](int a, int b) {
            for (int g = 0; g < groups; ++g) {
                const std::size_t ia = static_cast<std::size_t>(g) * A + a;
                const std::size_t ib = static_cast<std::size_t>(g) * A + b;
                const double* oa = buf.obs.data() + ia * buf.obs_dim;
                const double* ob = buf.obs.data() + ib * buf.obs_dim;
                for (int k = 0; k < buf.obs_dim; ++k) {
                    if (oa[k] != ob[k]) return oa[k] < ob[k];
                }
                const double* ua = buf.u.data() + ia * act;
                const double* ub = buf.u.data() + ib * act;
                for (int k = 0; k < act; ++k) {
                    if (ua[k] != ub[k]) return ua[k] < ub[k];
                }
            }
            return a < b;  // fully identical slots: index order is immaterial
        };
        std::sort(agent_order.begin(), agent_order.end(), content_less);
    }

    const PolicyParams snapshot = params;
    const AdamState adam_snapshot = adam;
    if (adam.m.size() != params.param_count()) adam.match(params.param_count());

    const int mb_count = std::min(cfg.minibatches, groups);
    const int g_base = groups / mb_count;
    const int g_rem = groups % mb_count;
    const int m_max = (g_base + 1) * A;

    Mat X(m_max, buf.obs_dim), XC, U(m_max, act);
    if (central) XC.resize(m_max, buf.critic_dim);
    std::vector<double> adv_mb(m_max), ret_mb(m_max), logp_old_mb(m_max);
    PolicyGrads grads;
    grads.match(params);
    std::vector<int> group_order(groups);
    std::iota(group_order.begin(), group_order.end(), 0);

    SpanList pspans, gspans;
    int batches_done = 0;
    double clip_sum = 0.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates over (t, env) groups; agents stay with their group.
        for (int i = groups - 1; i > 0; --i) {
            const int j = static_cast<int>(order_rng() % static_cast<std::uint64_t>(i + 1));
            std::swap(group_order[i], group_order[j]);
        }
        int g_cursor = 0;
        for (int mb = 0; mb < mb_count; ++mb) {
            const int g_cnt = g_base + (mb < g_rem ? 1 : 0);
            if (g_cnt == 0) continue;
            const int M = g_cnt * A;

            X.resize(M, buf.obs_dim);
            U.resize(M, act);
            if (central) XC.resize(M, buf.critic_dim);
            for (int gi = 0; gi < g_cnt; ++gi) {
                const int g = group_order[g_cursor + gi];
                for (int ai = 0; ai < A; ++ai) {
                    const std::size_t src = static_cast<std::size_t>(g) * A + agent_order[ai];
                    const int row = gi * A + ai;
                    std::memcpy(X.row(row), buf.obs.data() + src * buf.obs_dim,
                                sizeof(double) * buf.obs_dim);
                    std::memcpy(U.row(row), buf.u.data() + src * act, sizeof(double) * act);
                    if (central) {
                        std::memcpy(XC.row(row), buf.critic_obs.data() + src * buf.critic_dim,
                                    sizeof(double) * buf.critic_dim);
                    }
                    adv_mb[row] = buf.adv[src];
                    ret_mb[row] = buf.ret[src];
                    logp_old_mb[row] = buf.logp[src];
                }
            }
            g_cursor += g_cnt;

            normalize_advantages(adv_mb.data(), M);

            Minibatch batch;
            batch.obs = X.d.data();
            batch.critic_obs = central ? XC.d.data() : nullptr;
            batch.u = U.d.data();
            batch.adv = adv_mb.data();
            batch.ret = ret_mb.data();
            batch.logp_old = logp_old_mb.data();
            batch.rows = M;
            UpdateStats mb_stats;
            const double total_loss = ppo_loss(params, batch, cfg, &grads, &mb_stats, pool);
            if (!std::isfinite(total_loss)) {
                params = snapshot;
                adam = adam_snapshot;
                st.aborted = true;
                return st;
            }
            const double policy_loss = mb_stats.policy_loss;
            const double value_loss = mb_stats.value_loss;
            const double entropy = mb_stats.entropy;
            const int clipped = static_cast<int>(std::llround(mb_stats.clip_frac * M));

            gspans.build(grads);
            double norm_sq = 0.0;
            for (auto& [p, n] : gspans.spans) {
                for (std::size_t k = 0; k < n; ++k) norm_sq += p[k] * p[k];
            }
            const double gnorm = std::sqrt(norm_sq);
            const double scale =
                cfg.max_grad_norm > 0.0 && gnorm > cfg.max_grad_norm ? cfg.max_grad_norm / gnorm
                                                                     : 1.0;

            // Adam with bias correction
            pspans.build(params);
            adam.t += 1;
            const double b1 = 0.9, b2 = 0.999;
            const double bc1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
            const double bc2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
            std::size_t off = 0;
            for (std::size_t si = 0; si < pspans.spans.size(); ++si) {
                double* p = pspans.spans[si].first;
                double* g = gspans.spans[si].first;
                const std::size_t n = pspans.spans[si].second;
                for (std::size_t k = 0; k < n; ++k) {
                    const double gk = g[k] * scale;
                    double& m = adam.m[off + k];
                    double& v = adam.v[off + k];
                    m = b1 * m + (1.0 - b1) * gk;
                    v = b2 * v + (1.0 - b2) * gk * gk;
                    p[k] -= cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + 1e-8);
                }
                off += n;
            }

            const double cf = static_cast<double>(clipped) / M;
            if (batches_done == 0) st.first_clip_frac = cf;
            st.policy_loss += policy_loss;
            st.value_loss += value_loss;
            st.entropy += entropy;
            clip_sum += cf;
            st.grad_norm += gnorm;
            ++batches_done;
        }
    }
    if (batches_done > 0) {
        st.policy_loss /= batches_done;
        st.value_loss /= batches_done;
        st.entropy /= batches_done;
        st.clip_frac = clip_sum / batches_done;
        st.grad_norm /= batches_done;
    }
    return st;
}

void policy_forward(const PolicyParams& params, const double* obs_raw, int rows, Mat& mean,
                    std::vector<double>& log_std, Mat& value, ThreadPool* pool) {
    if (params.critic_dim != params.obs_dim) {
        throw std::invalid_argument("policy_forward: centralized critic needs explicit input");
    }
    static thread_local MlpCache a_cache, c_cache;
    std::vector<double> obs_n(static_cast<std::size_t>(rows) * params.obs_dim);
    params.obs_norm.normalize(obs_raw, obs_n.data(), rows);
    mlp_forward(params.actor, obs_n.data(), rows, a_cache, pool);
    mlp_forward(params.critic, obs_n.data(), rows, c_cache, pool);
    mean = a_cache.out;
    value = c_cache.out;
    clamp_log_std(params.log_std, log_std);
}

void policy_act(const PolicyParams& params, const double* obs_raw, int rows, double* actions_out,
                ThreadPool* pool) {
    static thread_local MlpCache a_cache;
    static thread_local std::vector<double> obs_n;
    obs_n.resize(static_cast<std::size_t>(rows) * params.obs_dim);
    params.obs_norm.normalize(obs_raw, obs_n.data(), rows);
    mlp_forward(params.actor, obs_n.data(), rows, a_cache, pool);
    for (int i = 0; i < rows; ++i) {
        const double* mu = a_cache.out.row(i);
        double* a = actions_out + static_cast<std::size_t>(i) * params.act_dim;
        for (int j = 0; j < params.act_dim; ++j) a[j] = std::tanh(mu[j]);
    }
}

EvalMetrics evaluate(const PolicyParams& params, const TaskSpec& task, const SimParams& sim,
                     const RandomizationSpec& rand, const ModelEntry& entry, int episodes,
                     std::uint64_t seed, ThreadPool* pool) {
    EvalMetrics out;
    if (episodes <= 0) return out;
    const int E = std::min(episodes, 128);
    const int per_slot = (episodes + E - 1) / E;
    EnvBatch env(task, sim, rand, entry, E, seed, pool);
    const int A = env.num_agents();
    const int rows = E * A;
    if (params.obs_dim != env.obs_dim() || params.act_dim != env.act_dim()) {
        throw std::invalid_argument(
            "evaluate: checkpoint dims (obs " + std::to_string(params.obs_dim) + ", act " +
            std::to_string(params.act_dim) + ") do not match task dims (obs " +
            std::to_string(env.obs_dim()) + ", act " + std::to_string(env.act_dim()) + ")");
    }

    std::vector<double> actions(static_cast<std::size_t>(rows) * env.act_dim());
    std::vector<int> done_eps(E, 0);
    std::vector<double> ep_ret(E, 0.0), ep_metric(E, 0.0);
    std::vector<int> ep_len(E, 0);
    struct Episode {
        double ret, len, metric;
        bool collided, passed;
    };
    std::vector<Episode> recorded;
    recorded.reserve(static_cast<std::size_t>(E) * per_slot);

    const std::int64_t max_steps =
        static_cast<std::int64_t>(per_slot) * task.episode_len * 4 + 64;
    for (std::int64_t step = 0; step < max_steps; ++step) {
        bool all_done = true;
        for (int s = 0; s < E; ++s) {
            if (done_eps[s] < per_slot) {
                all_done = false;
                break;
            }
        }
        if (all_done) break;
        policy_act(params, env.observations(), rows, actions.data(), pool);
        env.step(actions.data(), actions.size());
        for (int s = 0; s < E; ++s) {
            if (done_eps[s] >= per_slot) continue;
            double r = 0.0;
            for (int a = 0; a < A; ++a) r += env.rewards()[static_cast<std::size_t>(s) * A + a];
            ep_ret[s] += r / A;
            ep_metric[s] += env.metric()[s];
            ep_len[s] += 1;
            if (env.terminated()[s] || env.truncated()[s]) {
                recorded.push_back({ep_ret[s], static_cast<double>(ep_len[s]),
                                    ep_metric[s] / ep_len[s], env.collided()[s] != 0,
                                    env.gate_passed()[s] != 0});
                ep_ret[s] = 0.0;
                ep_metric[s] = 0.0;
                ep_len[s] = 0;
                done_eps[s] += 1;
            }
        }
    }

    const int n = std::min<int>(episodes, static_cast<int>(recorded.size()));
    out.episodes = n;
    for (int i = 0; i < n; ++i) {
        out.mean_return += recorded[i].ret;
        out.mean_ep_len += recorded[i].len;
        out.mean_metric += recorded[i].metric;
        out.collision_episodes += recorded[i].collided ? 1 : 0;
        out.gate_passes += recorded[i].passed ? 1 : 0;
    }
    if (n > 0) {
        out.mean_return /= n;
        out.mean_ep_len /= n;
        out.mean_metric /= n;
        double vr = 0.0, vm = 0.0;
        for (int i = 0; i < n; ++i) {
            vr += (recorded[i].ret - out.mean_return) * (recorded[i].ret - out.mean_return);
            vm += (recorded[i].metric - out.mean_metric) * (recorded[i].metric - out.mean_metric);
        }
        out.std_return = std::sqrt(vr / n);
        out.std_metric = std::sqrt(vm / n);
    }
    return out;
}

namespace {

// fixed-capacity ring for episode statistics
struct Ring {
    std::vector<double> d;
    std::size_t head = 0, n = 0;
    explicit Ring(std::size_t cap = 256) : d(cap, 0.0) {}
    void push(double v) {
        d[head] = v;
        head = (head + 1) % d.size();
        if (n < d.size()) ++n;
    }
    double mean() const {
        if (n == 0) return 0.0;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += d[i];
        return s / static_cast<double>(n);
    }
};

}  // namespace

TrainResult train(const Scenario& sc, const TrainOptions& opts, ThreadPool* pool) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    TrainResult result;

    EnvBatch env(sc, pool);
    const int N = env.num_envs(), A = env.num_agents();
    const int obs_dim = env.obs_dim(), act_dim = env.act_dim();
    const int rows = N * A;
    const int T = sc.ppo.rollout_len;
    const bool central = sc.ppo.centralized_critic && A > 1;
    const int critic_dim = central ? A * obs_dim : obs_dim;

    PolicyParams params;
    std::int64_t global_step = 0;
    if (!opts.resume_checkpoint.empty()) {
        params = load_policy(opts.resume_checkpoint, &global_step);
        if (params.obs_dim != obs_dim || params.act_dim != act_dim ||
            params.critic_dim != critic_dim) {
            throw std::runtime_error(
                "train: checkpoint dims (obs " + std::to_string(params.obs_dim) + ", act " +
                std::to_string(params.act_dim) + ", critic " + std::to_string(params.critic_dim) +
                ") do not match task dims (obs " + std::to_string(obs_dim) + ", act " +
                std::to_string(act_dim) + ", critic " + std::to_string(critic_dim) + ")");
        }
    } else {
        params = PolicyParams::create(obs_dim, act_dim, critic_dim, 256, sc.ppo.log_std_init,
                                      opts.seed);
    }

    AdamState adam;
    adam.match(params.param_count());
    RolloutBuffer buf;
    buf.resize(T, N, A, obs_dim, act_dim, critic_dim, central);

    std::vector<Rng> act_rng(rows);
    for (int r = 0; r < rows; ++r) act_rng[r].seed(mix_seed(opts.seed, r, 0, 2));
    Rng order_rng(mix_seed(opts.seed, 0, 0, 3));

    MlpCache a_cache, c_cache;
    std::vector<double> obs_n(static_cast<std::size_t>(rows) * obs_dim);
    std::vector<double> critic_in(central ? static_cast<std::size_t>(rows) * critic_dim : 0);
    std::vector<double> actions(static_cast<std::size_t>(rows) * act_dim);
    std::vector<double> boot(rows);
    std::vector<double> ls(act_dim), sigma(act_dim);
    std::vector<double> m_sum(obs_dim, 0.0), m_sq(obs_dim, 0.0);
    std::vector<double> batch_mean(obs_dim), batch_var(obs_dim);

    Ring ring_ret, ring_len, ring_metric;
    std::vector<double> ep_ret(N, 0.0), ep_metric(N, 0.0);
    std::vector<int> ep_len(N, 0);

    std::FILE* curve_file = nullptr;
    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        const std::string path = opts.out_dir + "/curve.csv";
        const bool append = !opts.resume_checkpoint.empty() && std::filesystem::exists(path);
        curve_file = std::fopen(path.c_str(), append ? "a" : "w");
        if (curve_file != nullptr && !append) {
            std::fprintf(curve_file,
                         "step,mean_return,mean_ep_len,policy_loss,value_loss,entropy,"
                         "clip_frac,grad_norm\n");
        }
    }

    const std::int64_t steps_per_iter = static_cast<std::int64_t>(T) * N;
    std::int64_t iter = 0;
    bool stop = false;
    while (!stop && result.steps_done < opts.total_steps) {
        const auto it0 = clock::now();
        for (int t = 0; t < T; ++t) {
            const double* raw = env.observations();
            params.obs_norm.normalize(raw, obs_n.data(), rows);
            for (int r = 0; r < rows; ++r) {
                const double* src = raw + static_cast<std::size_t>(r) * obs_dim;
                for (int j = 0; j < obs_dim; ++j) {
                    m_sum[j] += src[j];
                    m_sq[j] += src[j] * src[j];
                }
            }
            std::memcpy(buf.obs.data() + buf.sample(t, 0, 0) * obs_dim, obs_n.data(),
                        sizeof(double) * obs_n.size());
            if (central) {
                for (int n = 0; n < N; ++n) {
                    double* dst0 = critic_in.data() + static_cast<std::size_t>(n) * A * critic_dim;
                    // concatenated agent observations, shared by the slot's agents
                    for (int a = 0; a < A; ++a) {
                        std::memcpy(dst0 + static_cast<std::size_t>(a) * obs_dim,
                                    obs_n.data() + (static_cast<std::size_t>(n) * A + a) * obs_dim,
                                    sizeof(double) * obs_dim);
                    }
                    for (int a = 1; a < A; ++a) {
                        std::memcpy(dst0 + static_cast<std::size_t>(a) * critic_dim, dst0,
                                    sizeof(double) * critic_dim);
                    }
                }
                std::memcpy(buf.critic_obs.data() + buf.sample(t, 0, 0) * critic_dim,
                            critic_in.data(), sizeof(double) * critic_in.size());
            }

            mlp_forward(params.actor, obs_n.data(), rows, a_cache, pool);
            mlp_forward(params.critic, central ? critic_in.data() : obs_n.data(), rows, c_cache,
                        pool);
            clamp_log_std(params.log_std, ls);
            for (int j = 0; j < act_dim; ++j) sigma[j] = std::exp(ls[j]);
            for (int r = 0; r < rows; ++r) {
                const double* mu = a_cache.out.row(r);
                double* u_row = buf.u.data() + (buf.sample(t, 0, 0) + r) * act_dim;
                double* a_row = actions.data() + static_cast<std::size_t>(r) * act_dim;
                for (int j = 0; j < act_dim; ++j) {
                    u_row[j] = mu[j] + sigma[j] * act_rng[r].normal();
                    a_row[j] = std::tanh(u_row[j]);
                }
                buf.logp[buf.sample(t, 0, 0) + r] =
                    action_log_prob(mu, ls.data(), u_row, act_dim);
                buf.value[buf.sample(t, 0, 0) + r] = c_cache.out.at(r, 0);
            }

            env.step(actions.data(), actions.size());
            std::memcpy(buf.reward.data() + buf.sample(t, 0, 0), env.rewards(),
                        sizeof(double) * rows);
            for (int n = 0; n < N; ++n) {
                const bool done = env.terminated()[n] != 0 || env.truncated()[n] != 0;
                buf.done[static_cast<std::size_t>(t) * N + n] = done ? 1 : 0;
                double r_mean = 0.0;
                for (int a = 0; a < A; ++a)
                    r_mean += env.rewards()[static_cast<std::size_t>(n) * A + a];
                ep_ret[n] += r_mean / A;
                ep_metric[n] += env.metric()[n];
                ep_len[n] += 1;
                if (done) {
                    ring_ret.push(ep_ret[n]);
                    ring_len.push(static_cast<double>(ep_len[n]));
                    ring_metric.push(ep_metric[n] / ep_len[n]);
                    ep_ret[n] = 0.0;
                    ep_metric[n] = 0.0;
                    ep_len[n] = 0;
                }
            }
            result.steps_done += N;
            global_step += N;
        }

        // bootstrap values for GAE
        params.obs_norm.normalize(env.observations(), obs_n.data(), rows);
        if (central) {
            for (int n = 0; n < N; ++n) {
                double* dst0 = critic_in.data() + static_cast<std::size_t>(n) * A * critic_dim;
                for (int a = 0; a < A; ++a) {
                    std::memcpy(dst0 + static_cast<std::size_t>(a) * obs_dim,
                                obs_n.data() + (static_cast<std::size_t>(n) * A + a) * obs_dim,
                                sizeof(double) * obs_dim);
                }
                for (int a = 1; a < A; ++a) {
                    std::memcpy(dst0 + static_cast<std::size_t>(a) * critic_dim, dst0,
                                sizeof(double) * critic_dim);
                }
            }
        }
        mlp_forward(params.critic, central ? critic_in.data() : obs_n.data(), rows, c_cache, pool);
        for (int r = 0; r < rows; ++r) boot[r] = c_cache.out.at(r, 0);

        compute_gae(buf, boot.data(), sc.ppo.gamma, sc.ppo.gae_lambda);
        const UpdateStats us = ppo_update(params, adam, buf, sc.ppo, order_rng, pool);
        if (us.aborted) {
            result.aborted = true;
            if (!opts.out_dir.empty()) {
                save_policy(opts.out_dir + "/ckpt_last_good.bin", params, global_step);
            }
            break;
        }

        // fold the iteration's raw observation moments into the normalizer
        const double cnt = static_cast<double>(T) * rows;
        for (int j = 0; j < obs_dim; ++j) {
            batch_mean[j] = m_sum[j] / cnt;
            batch_var[j] = std::max(0.0, m_sq[j] / cnt - batch_mean[j] * batch_mean[j]);
            m_sum[j] = 0.0;
            m_sq[j] = 0.0;
        }
        params.obs_norm.update(batch_mean.data(), batch_var.data(), cnt);

        ++iter;
        const double iter_dt = std::chrono::duration<double>(clock::now() - it0).count();
        const double fps = iter_dt > 0.0 ? steps_per_iter / iter_dt : 0.0;
        CurveRow row{global_step, ring_ret.mean(), ring_len.mean(), us.policy_loss,
                     us.value_loss, us.entropy,    us.clip_frac,   us.grad_norm,
                     fps};
        result.curve.push_back(row);
        if (curve_file != nullptr) {
            std::fprintf(curve_file, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                         static_cast<long long>(row.step), row.mean_return, row.mean_ep_len,
                         row.policy_loss, row.value_loss, row.entropy, row.clip_frac,
                         row.grad_norm);
            std::fflush(curve_file);
        }
        if (opts.progress != nullptr) {
            opts.progress(opts.progress_user, global_step, row.mean_return, ring_metric.mean(),
                          fps);
        }
        if (opts.checkpoint_every > 0 && iter % opts.checkpoint_every == 0 &&
            !opts.out_dir.empty()) {
            save_policy(opts.out_dir + "/ckpt.bin", params, global_step);
        }

        if (opts.eval_every > 0 && opts.early_stop_metric > 0.0 &&
            iter % opts.eval_every == 0) {
            const EvalMetrics quick =
                evaluate(params, env.task(), sc.sim, sc.rand, sc.entry, opts.eval_episodes,
                         mix_seed(opts.seed, 0, 0, 4), pool);
            if (quick.episodes > 0 && quick.mean_metric < opts.early_stop_metric) stop = true;
        }
    }
    if (curve_file != nullptr) std::fclose(curve_file);

    result.final_eval = evaluate(params, env.task(), sc.sim, sc.rand, sc.entry,
                                 opts.final_eval_episodes, mix_seed(opts.seed, 0, 0, 5), pool);
    if (!opts.out_dir.empty()) {
        save_policy(opts.out_dir + "/ckpt_final.bin", params, global_step);
        std::FILE* f = std::fopen((opts.out_dir + "/eval.txt").c_str(), "w");
        if (f != nullptr) {
            std::fprintf(f, "episodes %d\nmean_return %.6f\nmean_ep_len %.2f\nmean_metric %.6f\n"
                            "collision_episodes %d\ngate_passes %d\n",
                         result.final_eval.episodes, result.final_eval.mean_return,
                         result.final_eval.mean_ep_len, result.final_eval.mean_metric,
                         result.final_eval.collision_episodes, result.final_eval.gate_passes);
            std::fclose(f);
        }
    }
    result.params = std::move(params);
    result.wall_seconds = std::chrono::duration<double>(clock::now() - t_start).count();
    return result;
}

}  // namespace dronesim
