/* dronesim C API: batched multirotor RL environments, policies, and training.
 *
 * All functions return dsim_status; outputs are written through pointers.
 * Handles are opaque and must be destroyed with the matching *_destroy call.
 * On failure, dsim_last_error() returns a thread-local description of the
 * most recent error. Buffers are caller-owned; any output pointer may be NULL
 * to skip that output.
 */
#ifndef DRONESIM_H
#define DRONESIM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DSIM_API __declspec(dllexport)
#else
#define DSIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dsim_status {
    DSIM_OK = 0,
    DSIM_ERR_CONFIG = 2,  /* bad configuration / file / dimensions */
    DSIM_ERR_RUNTIME = 3, /* runtime failure (I/O, aborted update, ...) */
    DSIM_ERR_BADARG = 4   /* null handle or malformed argument */
} dsim_status;

typedef struct dsim_env dsim_env;
typedef struct dsim_policy dsim_policy;

DSIM_API const char* dsim_version(void);
DSIM_API const char* dsim_last_error(void);

/* ------------------------------------------------------------------ env -- */

/* task_config: key-value text (same schema as the task files). num_envs > 0
 * overrides the config's num_envs; num_threads <= 0 selects the hardware
 * count. */
DSIM_API dsim_status dsim_env_create(const char* task_config, uint64_t seed, int num_envs,
                                     int num_threads, dsim_env** out);
DSIM_API void dsim_env_destroy(dsim_env* env);

DSIM_API int dsim_env_num_envs(const dsim_env* env);
DSIM_API int dsim_env_num_agents(const dsim_env* env);
DSIM_API int dsim_env_obs_dim(const dsim_env* env);
DSIM_API int dsim_env_act_dim(const dsim_env* env);
DSIM_API int dsim_env_episode_len(const dsim_env* env);
DSIM_API double dsim_env_dt(const dsim_env* env); /* control period [s] */

/* Resets every slot (indices == NULL) or the listed slots. obs_out, when
 * non-NULL, receives num_envs·num_agents·obs_dim doubles. */
DSIM_API dsim_status dsim_env_reset(dsim_env* env, const int* indices, int count, uint64_t seed,
                                    double* obs_out);

/* actions: num_envs·num_agents·act_dim doubles in [-1, 1]. Outputs (each
 * nullable): obs (N·agents·obs_dim), rewards (N·agents), terminated (N),
 * truncated (N), metric (N, task metric such as position error), collided
 * (N). Finished slots auto-reset; their obs row is the fresh episode's. */
DSIM_API dsim_status dsim_env_step(dsim_env* env, const double* actions, size_t actions_len,
                                   double* obs, double* rewards, uint8_t* terminated,
                                   uint8_t* truncated, double* metric, uint8_t* collided);

/* Zero-copy views of the latest step results (valid until the next call). */
DSIM_API const double* dsim_env_observations(const dsim_env* env);
DSIM_API const double* dsim_env_rewards(const dsim_env* env);

/* Per-drone kinematic state: pos(3) quat(4) vel(3) omega(3) = 13 doubles. */
#define DSIM_STATE_DIM 13
DSIM_API dsim_status dsim_env_get_state(const dsim_env* env, int slot, int drone,
                                        double out[DSIM_STATE_DIM]);

/* --------------------------------------------------------------- policy -- */

DSIM_API dsim_status dsim_policy_load(const char* path, dsim_policy** out);
DSIM_API dsim_status dsim_policy_save(const dsim_policy* policy, const char* path);
/* Fresh policy sized for the given environment (random init). */
DSIM_API dsim_status dsim_policy_create_for_env(const dsim_env* env, uint64_t seed,
                                                dsim_policy** out);
DSIM_API void dsim_policy_destroy(dsim_policy* policy);

DSIM_API int dsim_policy_obs_dim(const dsim_policy* policy);
DSIM_API int dsim_policy_act_dim(const dsim_policy* policy);

/* Deterministic action (tanh of the policy mean) for `rows` observations. */
DSIM_API dsim_status dsim_policy_act(const dsim_policy* policy, const double* obs, int rows,
                                     double* actions_out);

/* ------------------------------------------------------------- training -- */

typedef struct dsim_train_options {
    int64_t total_steps;
    uint64_t seed;
    const char* out_dir;          /* curve.csv, ckpt_final.bin, eval.txt */
    const char* resume_ckpt;      /* NULL: fresh start */
    int num_threads;              /* <= 0: hardware count */
    int eval_every;               /* iterations between early-stop evals; 0 off */
    int eval_episodes;
    double early_stop_metric;     /* <= 0 disables early stopping */
    int final_eval_episodes;
    /* optional per-iteration callback */
    void (*progress)(void* user, int64_t step, double mean_return, double mean_metric,
                     double fps);
    void* progress_user;
} dsim_train_options;

typedef struct dsim_train_report {
    int64_t steps_done;
    double wall_seconds;
    double final_mean_return;
    double final_mean_ep_len;
    double final_mean_metric;
    double final_std_return;
    double final_std_metric;
    int final_eval_episodes;
    int final_collision_episodes;
    int final_gate_passes;
    int aborted;
} dsim_train_report;

/* Full PPO training loop on the configured task. */
DSIM_API dsim_status dsim_train(const char* task_config, const dsim_train_options* options,
                                dsim_train_report* report);

/* Deterministic evaluation of a checkpoint on the configured task. */
DSIM_API dsim_status dsim_eval(const char* task_config, const char* ckpt_path, int episodes,
                               uint64_t seed, int num_threads, dsim_train_report* report);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DRONESIM_H */
