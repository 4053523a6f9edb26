#include "dronesim.h"

#include <cstring>
#include <exception>
#include <memory>
#include <string>

#include "dronesim/config.hpp"
#include "dronesim/env.hpp"
#include "dronesim/learner.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

dsim_status fail(dsim_status code, const std::string& msg) {
    set_error(msg);
    return code;
}

// ConfigError and bad dimensions map to DSIM_ERR_CONFIG, everything else to
// DSIM_ERR_RUNTIME.
template <class Fn>
dsim_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const dronesim::ConfigError& e) {
        return fail(DSIM_ERR_CONFIG, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(DSIM_ERR_CONFIG, e.what());
    } catch (const std::exception& e) {
        return fail(DSIM_ERR_RUNTIME, e.what());
    }
}

}  // namespace

struct dsim_env {
    std::unique_ptr<dronesim::ThreadPool> pool;
    std::unique_ptr<dronesim::EnvBatch> batch;
};

struct dsim_policy {
    dronesim::PolicyParams params;
    std::int64_t global_step = 0;
};

extern "C" {

const char* dsim_version(void) { return "1.0.0"; }

const char* dsim_last_error(void) { return g_last_error.c_str(); }

dsim_status dsim_env_create(const char* task_config, uint64_t seed, int num_envs, int num_threads,
                            dsim_env** out) {
    if (task_config == nullptr || out == nullptr) return fail(DSIM_ERR_BADARG, "null argument");
    return guarded([&] {
        auto cfg = dronesim::Config::parse_text(task_config);
        auto sc = dronesim::load_scenario(cfg);
        if (num_envs > 0) sc.num_envs = num_envs;
        if (seed != 0) sc.seed = seed;
        auto env = std::make_unique<dsim_env>();
        env->pool = std::make_unique<dronesim::ThreadPool>(num_threads);
        env->batch = std::make_unique<dronesim::EnvBatch>(sc, env->pool.get());
        *out = env.release();
        return DSIM_OK;
    });
}

void dsim_env_destroy(dsim_env* env) { delete env; }

int dsim_env_num_envs(const dsim_env* env) { return env != nullptr ? env->batch->num_envs() : 0; }
int dsim_env_num_agents(const dsim_env* env) {
    return env != nullptr ? env->batch->num_agents() : 0;
}
int dsim_env_obs_dim(const dsim_env* env) { return env != nullptr ? env->batch->obs_dim() : 0; }
int dsim_env_act_dim(const dsim_env* env) { return env != nullptr ? env->batch->act_dim() : 0; }
int dsim_env_episode_len(const dsim_env* env) {
    return env != nullptr ? env->batch->episode_len() : 0;
}

double dsim_env_dt(const dsim_env* env) {
    return env != nullptr ? env->batch->sim().dt_control : 0.0;
}

dsim_status dsim_env_reset(dsim_env* env, const int* indices, int count, uint64_t seed,
                           double* obs_out) {
    if (env == nullptr) return fail(DSIM_ERR_BADARG, "null env");
    return guarded([&] {
        if (indices == nullptr) {
            env->batch->reset_all(seed);
        } else {
            env->batch->reset_slots(indices, count, seed);
        }
        if (obs_out != nullptr) {
            const std::size_t n = static_cast<std::size_t>(env->batch->num_envs()) *
                                  env->batch->num_agents() * env->batch->obs_dim();
            std::memcpy(obs_out, env->batch->observations(), sizeof(double) * n);
        }
        return DSIM_OK;
    });
}

dsim_status dsim_env_step(dsim_env* env, const double* actions, size_t actions_len, double* obs,
                          double* rewards, uint8_t* terminated, uint8_t* truncated, double* metric,
                          uint8_t* collided) {
    if (env == nullptr || actions == nullptr) return fail(DSIM_ERR_BADARG, "null argument");
    return guarded([&] {
        dronesim::EnvBatch& b = *env->batch;
        b.step(actions, actions_len);
        const std::size_t n = static_cast<std::size_t>(b.num_envs());
        const std::size_t rows = n * b.num_agents();
        if (obs != nullptr) {
            std::memcpy(obs, b.observations(), sizeof(double) * rows * b.obs_dim());
        }
        if (rewards != nullptr) std::memcpy(rewards, b.rewards(), sizeof(double) * rows);
        if (terminated != nullptr) std::memcpy(terminated, b.terminated(), n);
        if (truncated != nullptr) std::memcpy(truncated, b.truncated(), n);
        if (metric != nullptr) std::memcpy(metric, b.metric(), sizeof(double) * n);
        if (collided != nullptr) std::memcpy(collided, b.collided(), n);
        return DSIM_OK;
    });
}

const double* dsim_env_observations(const dsim_env* env) {
    return env != nullptr ? env->batch->observations() : nullptr;
}

const double* dsim_env_rewards(const dsim_env* env) {
    return env != nullptr ? env->batch->rewards() : nullptr;
}

dsim_status dsim_env_get_state(const dsim_env* env, int slot, int drone,
                               double out[DSIM_STATE_DIM]) {
    if (env == nullptr || out == nullptr) return fail(DSIM_ERR_BADARG, "null argument");
    if (slot < 0 || slot >= env->batch->num_envs() || drone < 0 ||
        drone >= env->batch->num_agents()) {
        return fail(DSIM_ERR_BADARG, "state index out of range");
    }
    env->batch->copy_state(slot, drone, out);
    return DSIM_OK;
}

dsim_status dsim_policy_load(const char* path, dsim_policy** out) {
    if (path == nullptr || out == nullptr) return fail(DSIM_ERR_BADARG, "null argument");
    return guarded([&] {
        auto p = std::make_unique<dsim_policy>();
        p->params = dronesim::load_policy(path, &p->global_step);
        *out = p.release();
        return DSIM_OK;
    });
}

dsim_status dsim_policy_save(const dsim_policy* policy, const char* path) {
    if (policy == nullptr || path == nullptr) return fail(DSIM_ERR_BADARG, "null argument");
    return guarded([&] {
        dronesim::save_policy(path, policy->params, policy->global_step);
        return DSIM_OK;
    });
}

dsim_status dsim_policy_create_for_env(const dsim_env* env, uint64_t seed, dsim_policy** out) {
    if (env == nullptr || out == nullptr) return fail(DSIM_ERR_BADARG, "null argument");
    return guarded([&] {
        auto p = std::make_unique<dsim_policy>();
        p->params = dronesim::PolicyParams::create(env->batch->obs_dim(), env->batch->act_dim(),
                                                   env->batch->obs_dim(), 256, -0.5, seed);
        *out = p.release();
        return DSIM_OK;
    });
}

void dsim_policy_destroy(dsim_policy* policy) { delete policy; }

int dsim_policy_obs_dim(const dsim_policy* policy) {
    return policy != nullptr ? policy->params.obs_dim : 0;
}
int dsim_policy_act_dim(const dsim_policy* policy) {
    return policy != nullptr ? policy->params.act_dim : 0;
}

dsim_status dsim_policy_act(const dsim_policy* policy, const double* obs, int rows,
                            double* actions_out) {
    if (policy == nullptr || obs == nullptr || actions_out == nullptr) {
        return fail(DSIM_ERR_BADARG, "null argument");
    }
    return guarded([&] {
        dronesim::policy_act(policy->params, obs, rows, actions_out, nullptr);
        return DSIM_OK;
    });
}

dsim_status dsim_train(const char* task_config, const dsim_train_options* options,
                       dsim_train_report* report) {
    if (task_config == nullptr || options == nullptr) {
        return fail(DSIM_ERR_BADARG, "null argument");
    }
    return guarded([&] {
        auto cfg = dronesim::Config::parse_text(task_config);
        auto sc = dronesim::load_scenario(cfg);
        if (options->seed != 0) sc.seed = options->seed;
        dronesim::ThreadPool pool(options->num_threads);
        dronesim::TrainOptions topt;
        topt.total_steps = options->total_steps;
        topt.seed = options->seed;
        topt.out_dir = options->out_dir != nullptr ? options->out_dir : "";
        topt.resume_checkpoint = options->resume_ckpt != nullptr ? options->resume_ckpt : "";
        topt.eval_every = options->eval_every;
        if (options->eval_episodes > 0) topt.eval_episodes = options->eval_episodes;
        topt.early_stop_metric = options->early_stop_metric;
        if (options->final_eval_episodes > 0) {
            topt.final_eval_episodes = options->final_eval_episodes;
        }
        topt.progress = options->progress;
        topt.progress_user = options->progress_user;
        const dronesim::TrainResult res = dronesim::train(sc, topt, &pool);
        if (report != nullptr) {
            *report = {};
            report->steps_done = res.steps_done;
            report->wall_seconds = res.wall_seconds;
            report->final_mean_return = res.final_eval.mean_return;
            report->final_mean_ep_len = res.final_eval.mean_ep_len;
            report->final_mean_metric = res.final_eval.mean_metric;
            report->final_std_return = res.final_eval.std_return;
            report->final_std_metric = res.final_eval.std_metric;
            report->final_eval_episodes = res.final_eval.episodes;
            report->final_collision_episodes = res.final_eval.collision_episodes;
            report->final_gate_passes = res.final_eval.gate_passes;
            report->aborted = res.aborted ? 1 : 0;
        }
        if (res.aborted) return fail(DSIM_ERR_RUNTIME, "training aborted on non-finite loss");
        return DSIM_OK;
    });
}

dsim_status dsim_eval(const char* task_config, const char* ckpt_path, int episodes, uint64_t seed,
                      int num_threads, dsim_train_report* report) {
    if (task_config == nullptr || ckpt_path == nullptr) {
        return fail(DSIM_ERR_BADARG, "null argument");
    }
    return guarded([&] {
        auto cfg = dronesim::Config::parse_text(task_config);
        auto sc = dronesim::load_scenario(cfg);
        dronesim::PolicyParams params = dronesim::load_policy(ckpt_path);
        dronesim::ThreadPool pool(num_threads);
        const dronesim::EvalMetrics m = dronesim::evaluate(
            params, sc.task, sc.sim, sc.rand, sc.entry, episodes, seed, &pool);
        if (report != nullptr) {
            *report = {};
            report->final_mean_return = m.mean_return;
            report->final_mean_ep_len = m.mean_ep_len;
            report->final_mean_metric = m.mean_metric;
            report->final_std_return = m.std_return;
            report->final_std_metric = m.std_metric;
            report->final_eval_episodes = m.episodes;
            report->final_collision_episodes = m.collision_episodes;
            report->final_gate_passes = m.gate_passes;
        }
        return DSIM_OK;
    });
}

}  // extern "C"
