// dronesim command-line driver: bench / train / eval / rollout.
// Talks to the engine exclusively through the C API in dronesim.h.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dronesim.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonArgs {
    std::string task_file;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    int threads = 0;
};

int status_to_exit(dsim_status s) {
    switch (s) {
        case DSIM_OK: return kExitOk;
        case DSIM_ERR_CONFIG: return kExitConfig;
        case DSIM_ERR_BADARG: return kExitConfig;
        default: return kExitRuntime;
    }
}

int report_failure(const char* what, dsim_status s) {
    std::fprintf(stderr, "error: %s failed: %s\n", what, dsim_last_error());
    return status_to_exit(s);
}

// File text + `--override k=v` lines appended (later keys win) + the seed.
std::string resolve_config(const CommonArgs& args) {
    std::ifstream f(args.task_file);
    if (!f) throw std::runtime_error("cannot open task file: " + args.task_file);
    std::stringstream ss;
    ss << f.rdbuf();
    std::string text = ss.str();
    if (!text.empty() && text.back() != '\n') text += "\n";
    for (const auto& ov : args.overrides) {
        std::string line = ov;
        std::replace(line.begin(), line.end(), ',', ' ');
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("override '" + ov + "': expected key=value");
        }
        text += line.substr(0, eq) + " = " + line.substr(eq + 1) + "\n";
    }
    text += "seed = " + std::to_string(args.seed) + "\n";
    return text;
}

// Reproducibility: the exact config a command ran with sits next to its outputs.
void record_config(const CommonArgs& args, const std::string& text) {
    if (args.out_dir.empty()) return;
    std::filesystem::create_directories(args.out_dir);
    std::ofstream f(args.out_dir + "/config.txt");
    f << text;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

int run_bench(const CommonArgs& args, const std::vector<int>& env_counts, double duration,
              int trials, bool with_policy, const std::string& ckpt) {
    const std::string cfg = resolve_config(args);
    record_config(args, cfg);
    std::FILE* rec = nullptr;
    if (!args.out_dir.empty()) {
        rec = std::fopen((args.out_dir + "/bench.csv").c_str(), "w");
        if (rec != nullptr) std::fprintf(rec, "envs,trial,steps,seconds,fps\n");
    }
    std::printf("%8s %14s %14s %10s\n", "envs", "fps_mean", "fps_std", "trials");
    std::vector<double> fps_means;
    for (const int n_envs : env_counts) {
        dsim_env* env = nullptr;
        dsim_status st = dsim_env_create(cfg.c_str(), args.seed, n_envs, args.threads, &env);
        if (st != DSIM_OK) {
            if (rec != nullptr) std::fclose(rec);
            return report_failure("env creation", st);
        }
        const int agents = dsim_env_num_agents(env);
        const int act_dim = dsim_env_act_dim(env);
        const std::size_t act_len =
            static_cast<std::size_t>(n_envs) * agents * static_cast<std::size_t>(act_dim);

        dsim_policy* policy = nullptr;
        if (with_policy) {
            st = ckpt.empty() ? dsim_policy_create_for_env(env, args.seed, &policy)
                              : dsim_policy_load(ckpt.c_str(), &policy);
            if (st != DSIM_OK) {
                dsim_env_destroy(env);
                if (rec != nullptr) std::fclose(rec);
                return report_failure("policy setup", st);
            }
        }

        std::vector<double> actions(act_len, 0.0);
        std::mt19937_64 rng(args.seed ^ 0x9E3779B97F4A7C15ull);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        auto one_pass = [&]() {
            if (with_policy) {
                dsim_policy_act(policy, dsim_env_observations(env), n_envs * agents,
                                actions.data());
            } else {
                for (auto& a : actions) a = uni(rng);
            }
            dsim_env_step(env, actions.data(), act_len, nullptr, nullptr, nullptr, nullptr,
                          nullptr, nullptr);
        };

        using clock = std::chrono::steady_clock;
        std::vector<double> fps;
        if (duration > 0.0) {
            const auto w0 = clock::now();
            while (std::chrono::duration<double>(clock::now() - w0).count() < 0.25) one_pass();
            for (int trial = 0; trial < trials; ++trial) {
                const auto t0 = clock::now();
                std::int64_t batch_steps = 0;
                while (std::chrono::duration<double>(clock::now() - t0).count() < duration) {
                    one_pass();
                    ++batch_steps;
                }
                const double sec = std::chrono::duration<double>(clock::now() - t0).count();
                const double f = static_cast<double>(batch_steps) * n_envs / sec;
                fps.push_back(f);
                if (rec != nullptr) {
                    std::fprintf(rec, "%d,%d,%lld,%.6f,%.1f\n", n_envs, trial,
                                 static_cast<long long>(batch_steps) * n_envs, sec, f);
                }
            }
        }
        std::printf("%8d %14.1f %14.1f %10zu\n", n_envs, mean_of(fps), std_of(fps), fps.size());
        fps_means.push_back(mean_of(fps));
        if (policy != nullptr) dsim_policy_destroy(policy);
        dsim_env_destroy(env);
    }
    for (std::size_t i = 1; i < env_counts.size(); ++i) {
        if (fps_means[i - 1] > 0.0) {
            std::printf("scaling fps(%d)/fps(%d) = %.2f\n", env_counts[i], env_counts[i - 1],
                        fps_means[i] / fps_means[i - 1]);
            if (rec != nullptr) {
                std::fprintf(rec, "ratio_%d_%d,,,,%.4f\n", env_counts[i], env_counts[i - 1],
                             fps_means[i] / fps_means[i - 1]);
            }
        }
    }
    if (rec != nullptr) std::fclose(rec);
    return kExitOk;
}

void print_progress(void*, std::int64_t step, double mean_return, double mean_metric,
                    double fps) {
    std::printf("step %10lld  return %8.3f  metric %7.4f  fps %9.0f\n",
                static_cast<long long>(step), mean_return, mean_metric, fps);
    std::fflush(stdout);
}

int run_train(const CommonArgs& args, std::int64_t steps, const std::string& resume,
              double early_stop, int eval_every, int eval_episodes, int final_eval_episodes) {
    const std::string cfg = resolve_config(args);
    record_config(args, cfg);
    dsim_train_options opt{};
    opt.total_steps = steps;
    opt.seed = args.seed;
    opt.out_dir = args.out_dir.c_str();
    opt.resume_ckpt = resume.empty() ? nullptr : resume.c_str();
    opt.num_threads = args.threads;
    opt.eval_every = eval_every;
    opt.eval_episodes = eval_episodes;
    opt.early_stop_metric = early_stop;
    opt.final_eval_episodes = final_eval_episodes;
    opt.progress = &print_progress;
    dsim_train_report rep{};
    const dsim_status st = dsim_train(cfg.c_str(), &opt, &rep);
    if (st != DSIM_OK) return report_failure("train", st);
    std::printf("trained %lld steps in %.1f s\n", static_cast<long long>(rep.steps_done),
                rep.wall_seconds);
    std::printf("final eval over %d episodes: return %.3f±%.3f, metric %.4f±%.4f, len %.1f\n",
                rep.final_eval_episodes, rep.final_mean_return, rep.final_std_return,
                rep.final_mean_metric, rep.final_std_metric, rep.final_mean_ep_len);
    return kExitOk;
}

int run_eval(const CommonArgs& args, const std::string& ckpt, int episodes) {
    const std::string cfg = resolve_config(args);
    record_config(args, cfg);
    dsim_train_report rep{};
    const dsim_status st =
        dsim_eval(cfg.c_str(), ckpt.c_str(), episodes, args.seed + 1, args.threads, &rep);
    if (st != DSIM_OK) return report_failure("eval", st);
    std::printf("episodes %d\n", rep.final_eval_episodes);
    std::printf("return   %.4f ± %.4f\n", rep.final_mean_return, rep.final_std_return);
    std::printf("metric   %.4f ± %.4f\n", rep.final_mean_metric, rep.final_std_metric);
    std::printf("ep_len   %.1f\n", rep.final_mean_ep_len);
    std::printf("collisions %d\ngate_passes %d\n", rep.final_collision_episodes,
                rep.final_gate_passes);
    if (!args.out_dir.empty()) {
        std::ofstream f(args.out_dir + "/eval.txt");
        f << "episodes " << rep.final_eval_episodes << "\n"
          << "mean_return " << rep.final_mean_return << "\n"
          << "std_return " << rep.final_std_return << "\n"
          << "mean_metric " << rep.final_mean_metric << "\n"
          << "std_metric " << rep.final_std_metric << "\n"
          << "mean_ep_len " << rep.final_mean_ep_len << "\n"
          << "collision_episodes " << rep.final_collision_episodes << "\n"
          << "gate_passes " << rep.final_gate_passes << "\n";
    }
    return kExitOk;
}

int run_rollout(const CommonArgs& args, const std::string& ckpt, int episodes, bool record) {
    const std::string cfg = resolve_config(args);
    record_config(args, cfg);
    dsim_env* env = nullptr;
    dsim_status st = dsim_env_create(cfg.c_str(), args.seed, 1, args.threads, &env);
    if (st != DSIM_OK) return report_failure("env creation", st);
    dsim_policy* policy = nullptr;
    st = dsim_policy_load(ckpt.c_str(), &policy);
    if (st != DSIM_OK) {
        dsim_env_destroy(env);
        return report_failure("policy load", st);
    }
    if (dsim_policy_obs_dim(policy) != dsim_env_obs_dim(env) ||
        dsim_policy_act_dim(policy) != dsim_env_act_dim(env)) {
        std::fprintf(stderr,
                     "error: checkpoint dims (obs %d, act %d) do not match task dims "
                     "(obs %d, act %d)\n",
                     dsim_policy_obs_dim(policy), dsim_policy_act_dim(policy),
                     dsim_env_obs_dim(env), dsim_env_act_dim(env));
        dsim_policy_destroy(policy);
        dsim_env_destroy(env);
        return kExitConfig;
    }

    const int agents = dsim_env_num_agents(env);
    const int act_dim = dsim_env_act_dim(env);
    const double dt = dsim_env_dt(env);
    std::vector<double> actions(static_cast<std::size_t>(agents) * act_dim);
    std::vector<double> rewards(static_cast<std::size_t>(agents));
    std::uint8_t term = 0, trunc = 0, coll = 0;
    double metric = 0.0;
    double state[DSIM_STATE_DIM];

    std::FILE* traj = nullptr;
    if (record && !args.out_dir.empty()) {
        traj = std::fopen((args.out_dir + "/trajectory.csv").c_str(), "w");
        if (traj != nullptr) {
            std::fprintf(traj, "episode,step,time,drone,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz");
            for (int j = 0; j < act_dim; ++j) std::fprintf(traj, ",a%d", j);
            std::fprintf(traj, ",reward\n");
        }
    }
    std::FILE* summary = nullptr;
    if (!args.out_dir.empty()) {
        summary = std::fopen((args.out_dir + "/episodes.txt").c_str(), "w");
        if (summary != nullptr) {
            std::fprintf(summary, "%8s %8s %12s %12s %10s\n", "episode", "steps", "return",
                         "metric", "result");
        }
    }

    for (int ep = 0; ep < episodes; ++ep) {
        double ep_ret = 0.0, ep_metric = 0.0;
        int steps = 0;
        for (;;) {
            dsim_policy_act(policy, dsim_env_observations(env), agents, actions.data());
            st = dsim_env_step(env, actions.data(), actions.size(), nullptr, rewards.data(),
                               &term, &trunc, &metric, &coll);
            if (st != DSIM_OK) break;
            ++steps;
            double r = 0.0;
            for (int a = 0; a < agents; ++a) r += rewards[a];
            ep_ret += r / agents;
            ep_metric += metric;
            if (traj != nullptr) {
                for (int a = 0; a < agents; ++a) {
                    dsim_env_get_state(env, 0, a, state);
                    std::fprintf(traj, "%d,%d,%.4f,%d", ep, steps, steps * dt, a);
                    for (double v : state) std::fprintf(traj, ",%.9g", v);
                    for (int j = 0; j < act_dim; ++j) {
                        std::fprintf(traj, ",%.9g",
                                     actions[static_cast<std::size_t>(a) * act_dim + j]);
                    }
                    std::fprintf(traj, ",%.9g\n", rewards[a]);
                }
            }
            if (term || trunc) break;
        }
        if (st != DSIM_OK) {
            if (traj != nullptr) std::fclose(traj);
            if (summary != nullptr) std::fclose(summary);
            dsim_policy_destroy(policy);
            dsim_env_destroy(env);
            return report_failure("rollout step", st);
        }
        const char* result = term ? (coll ? "collision" : "terminated") : "truncated";
        std::printf("episode %d: %d steps, return %.3f, mean metric %.4f, %s\n", ep, steps,
                    ep_ret, ep_metric / std::max(1, steps), result);
        if (summary != nullptr) {
            std::fprintf(summary, "%8d %8d %12.4f %12.5f %10s\n", ep, steps, ep_ret,
                         ep_metric / std::max(1, steps), result);
        }
    }
    if (traj != nullptr) std::fclose(traj);
    if (summary != nullptr) std::fclose(summary);
    dsim_policy_destroy(policy);
    dsim_env_destroy(env);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dronesim: batched multirotor RL simulator"};
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--task", common.task_file, "task config file")->required();
        cmd->add_option("--seed", common.seed, "rng seed");
        cmd->add_option("--out", common.out_dir, "output directory");
        cmd->add_option("--override", common.overrides, "config override key=value (repeatable)");
        cmd->add_option("--threads", common.threads, "worker threads (0 = hardware)");
    };

    auto* bench = app.add_subcommand("bench", "measure environment throughput");
    std::vector<int> env_counts{1024, 4096};
    double duration = 2.0;
    int trials = 5;
    bool with_policy = false;
    std::string bench_ckpt;
    add_common(bench);
    bench->add_option("--envs", env_counts, "environment counts")->delimiter(',');
    bench->add_option("--duration", duration, "seconds per trial");
    bench->add_option("--trials", trials, "trials per env count");
    bench->add_flag("--with-policy", with_policy, "include policy inference in the loop");
    bench->add_option("--ckpt", bench_ckpt, "checkpoint for --with-policy");

    auto* train = app.add_subcommand("train", "PPO training");
    std::int64_t steps = 1'000'000;
    std::string resume;
    double early_stop = -1.0;
    int eval_every = 0, eval_episodes = 32, final_eval_episodes = 100;
    add_common(train);
    train->add_option("--steps", steps, "total environment steps");
    train->add_option("--ckpt", resume, "resume from checkpoint");
    train->add_option("--early-stop-metric", early_stop, "stop when eval metric drops below");
    train->add_option("--eval-every", eval_every, "iterations between early-stop evals");
    train->add_option("--eval-episodes", eval_episodes, "episodes per early-stop eval");
    train->add_option("--final-eval-episodes", final_eval_episodes, "episodes in the final eval");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string eval_ckpt;
    int episodes = 100;
    add_common(eval);
    eval->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--episodes", episodes, "evaluation episodes");

    auto* rollout = app.add_subcommand("rollout", "record trajectories of a checkpoint");
    std::string rollout_ckpt;
    int rollout_episodes = 1;
    bool record = false;
    add_common(rollout);
    rollout->add_option("--ckpt", rollout_ckpt, "checkpoint file")->required();
    rollout->add_option("--episodes", rollout_episodes, "episodes to roll out");
    rollout->add_flag("--record", record, "write per-step trajectory records");

    CLI11_PARSE(app, argc, argv);

    try {
        if (bench->parsed()) {
            return run_bench(common, env_counts, duration, trials, with_policy, bench_ckpt);
        }
        if (train->parsed()) {
            return run_train(common, steps, resume, early_stop, eval_every, eval_episodes,
                             final_eval_episodes);
        }
        if (eval->parsed()) return run_eval(common, eval_ckpt, episodes);
        if (rollout->parsed()) return run_rollout(common, rollout_ckpt, rollout_episodes, record);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitConfig;
}
