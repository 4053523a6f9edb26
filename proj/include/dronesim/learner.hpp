#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dronesim/env.hpp"
#include "dronesim/policy.hpp"
#include "dronesim/ppo_config.hpp"

namespace dronesim {

// T×N×A on-policy rollout storage. Observations are stored already
// normalized; `u` holds pre-squash actions so ratios are exact at replay.
struct RolloutBuffer {
    int T = 0, N = 0, A = 1, obs_dim = 0, act_dim = 0, critic_dim = 0;
    std::vector<double> obs;         // T·N·A·obs_dim
    std::vector<double> critic_obs;  // T·N·A·critic_dim (only when centralized)
    std::vector<double> u;           // T·N·A·act_dim
    std::vector<double> logp;        // T·N·A
    std::vector<double> reward;      // T·N·A
    std::vector<double> value;       // T·N·A
    std::vector<std::uint8_t> done;  // T·N (shared across a slot's agents)
    std::vector<double> adv, ret;    // T·N·A

    bool centralized() const { return !critic_obs.empty(); }
    void resize(int T_, int N_, int A_, int obs_dim_, int act_dim_, int critic_dim_,
                bool centralized_critic);
    std::size_t sample(int t, int n, int a) const {
        return (static_cast<std::size_t>(t) * N + n) * A + a;
    }
};

// δ_t = r_t + γ·v_{t+1}·(1−done_t) − v_t;  A_t = δ_t + γλ(1−done_t)·A_{t+1};
// returns = A + v. bootstrap_value has N·A entries for v_T.
void compute_gae(RolloutBuffer& buf, const double* bootstrap_value, double gamma, double lambda);

// log π(u | obs) of the tanh-squashed diagonal Gaussian, including the
// squash correction −Σ log(1 − tanh(u)² + ε).
double action_log_prob(const double* mean, const double* log_std_clamped, const double* u,
                       int act_dim);

double gaussian_entropy(const double* log_std_clamped, int act_dim);

struct AdamState {
    std::vector<double> m, v;
    std::int64_t t = 0;
    void match(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        t = 0;
    }
};

// One gathered minibatch (rows are samples). Observations are normalized,
// advantages are already normalized, u holds pre-squash actions.
struct Minibatch {
    const double* obs = nullptr;         // rows × obs_dim
    const double* critic_obs = nullptr;  // rows × critic_dim; nullptr = use obs
    const double* u = nullptr;           // rows × act_dim
    const double* adv = nullptr;         // rows
    const double* ret = nullptr;         // rows
    const double* logp_old = nullptr;    // rows
    int rows = 0;
};

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_frac = 0.0;       // mean over minibatches
    double first_clip_frac = 0.0; // first minibatch of the first epoch
    double grad_norm = 0.0;       // mean pre-clip global norm
    bool aborted = false;         // non-finite loss; params restored
};

// Clipped-surrogate PPO update: epochs × minibatches passes, advantages
// normalized per minibatch, Adam with bias correction, global gradient-norm
// clip. Multi-agent buffers are canonicalized so any permutation of the agent
// axis yields bit-identical parameters (minibatches partition (t, env) groups
// and agent slots are ordered by content).
UpdateStats ppo_update(PolicyParams& params, AdamState& adam, const RolloutBuffer& buf,
                       const PpoConfig& cfg, Rng& order_rng, ThreadPool* pool);

// Total loss of one minibatch: clipped-ratio surrogate + value MSE (scaled by
// value_coef) − entropy bonus. Fills parameter gradients when `grads` is
// non-null and per-piece stats when `stats` is non-null. Pure in `params`.
double ppo_loss(const PolicyParams& params, const Minibatch& mb, const PpoConfig& cfg,
                PolicyGrads* grads, UpdateStats* stats, ThreadPool* pool);

// Shift to zero mean and unit standard deviation (population, +1e-8 guard).
void normalize_advantages(double* adv, int n);

// (mean, log-std, value) for a batch of raw observations; the decentralized
// critic path (critic input = own observation). Throws on dimension mismatch.
void policy_forward(const PolicyParams& params, const double* obs_raw, int rows, Mat& mean,
                    std::vector<double>& log_std, Mat& value, ThreadPool* pool);

// Deterministic action: tanh(mean).
void policy_act(const PolicyParams& params, const double* obs_raw, int rows, double* actions_out,
                ThreadPool* pool);

struct EvalMetrics {
    int episodes = 0;
    double mean_return = 0.0;
    double mean_ep_len = 0.0;
    double mean_metric = 0.0;  // task metric averaged over steps, then episodes
    double std_return = 0.0;
    double std_metric = 0.0;
    int collision_episodes = 0;
    int gate_passes = 0;
};

// Deterministic-policy evaluation over complete episodes.
EvalMetrics evaluate(const PolicyParams& params, const TaskSpec& task, const SimParams& sim,
                     const RandomizationSpec& rand, const ModelEntry& entry, int episodes,
                     std::uint64_t seed, ThreadPool* pool);

struct TrainOptions {
    std::int64_t total_steps = 1'000'000;  // env steps (slot transitions)
    std::uint64_t seed = 0;
    std::string out_dir;          // when set: curve.csv, ckpt_final.bin, eval.txt
    int eval_every = 10;          // iterations between early-stop evals; 0 disables
    int eval_episodes = 32;
    double early_stop_metric = -1.0;  // stop once quick-eval mean_metric < this
    int final_eval_episodes = 100;
    std::string resume_checkpoint;
    int checkpoint_every = 0;     // iterations; 0 = only final
    void (*progress)(void* user, std::int64_t step, double mean_return, double mean_metric,
                     double fps) = nullptr;
    void* progress_user = nullptr;
};

struct CurveRow {
    std::int64_t step = 0;
    double mean_return = 0.0, mean_ep_len = 0.0;
    double policy_loss = 0.0, value_loss = 0.0, entropy = 0.0, clip_frac = 0.0, grad_norm = 0.0;
    double fps = 0.0;
};

struct TrainResult {
    PolicyParams params;
    std::vector<CurveRow> curve;
    EvalMetrics final_eval;
    std::int64_t steps_done = 0;
    bool aborted = false;
    double wall_seconds = 0.0;
};

// Alternating rollout/update loop with parameter sharing across agents.
TrainResult train(const Scenario& sc, const TrainOptions& opts, ThreadPool* pool);

}  // namespace dronesim
