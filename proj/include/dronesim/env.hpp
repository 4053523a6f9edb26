#pragma once

#include <cstdint>
#include <vector>

#include "dronesim/config.hpp"
#include "dronesim/task.hpp"
#include "dronesim/thread_pool.hpp"

namespace dronesim {

// N independent environment instances stepped in lockstep. State is kept as
// per-field arrays over slots; stepping slot i never touches slot j, and each
// slot draws from its own rng streams keyed by (seed, slot, episode), so a
// batch step is deterministic for any worker partition. The step path
// performs no heap allocation.
class EnvBatch {
public:
    EnvBatch(const TaskSpec& task, const SimParams& sim, const RandomizationSpec& rand,
             const ModelEntry& entry, int num_envs, std::uint64_t seed,
             ThreadPool* pool = nullptr);
    EnvBatch(const Scenario& sc, ThreadPool* pool = nullptr)
        : EnvBatch(sc.task, sc.sim, sc.rand, sc.entry, sc.num_envs, sc.seed, pool) {}

    int num_envs() const { return num_envs_; }
    int num_agents() const { return agents_; }
    int obs_dim() const { return obs_dim_; }
    int act_dim() const { return act_dim_; }
    int episode_len() const { return task_.episode_len; }
    const TaskSpec& task() const { return task_; }
    const SimParams& sim() const { return sim_; }
    const DroneModel& nominal_model() const { return entry_.model; }
    double nominal_hover_throttle() const { return hover_throttle_; }

    // Re-randomizes the listed slots; deterministic given (seed, slot).
    void reset_all(std::uint64_t seed);
    void reset_slots(const int* indices, int count, std::uint64_t seed);

    // actions: flat (N · agents · act_dim), components clamped to [-1, 1].
    // A length mismatch throws std::invalid_argument before any mutation.
    // Finished slots auto-reset; their observation row is the fresh one.
    void step(const double* actions, std::size_t len);

    // Step-result views, valid until the next step/reset.
    const double* observations() const { return obs_.data(); }   // N·agents·obs_dim
    const double* rewards() const { return rewards_.data(); }    // N·agents
    const std::uint8_t* terminated() const { return terminated_.data(); }  // N
    const std::uint8_t* truncated() const { return truncated_.data(); }    // N
    const double* metric() const { return metric_.data(); }      // N, task metric
    const std::uint8_t* collided() const { return collided_.data(); }      // N
    // Whether the slot's current episode has passed the gate (snapshot taken
    // before any auto-reset, so it is readable on the episode's final step).
    const std::uint8_t* gate_passed() const { return gate_passed_.data(); }  // N

    // Direct state access (tests, recording, evaluation).
    const BodyState& body(int env, int drone = 0) const { return bodies_[idx(env, drone)]; }
    void set_body(int env, int drone, const BodyState& b);
    const MotorState& motors(int env, int drone = 0) const { return motors_[idx(env, drone)]; }
    void set_motors(int env, int drone, const MotorState& m) { motors_[idx(env, drone)] = m; }
    const TiltState& tilt(int env, int drone = 0) const { return tilts_[idx(env, drone)]; }
    PendulumState pendulum(int env) const;
    void set_pendulum(int env, const PendulumState& p);
    const DroneModel& slot_model(int env) const { return models_[env]; }
    const LinkConfig& slot_link(int env) const { return links_[env]; }
    Vec3 wind_force(int env) const { return wind_[env]; }
    int step_count(int env) const { return steps_[env]; }
    // Rebuild the observation rows after test hooks mutated state.
    void refresh_observations();

    // Flat layout of one drone state in recordings: pos(3) quat(4) vel(3) omega(3).
    static constexpr int kStateDim = 13;
    void copy_state(int env, int drone, double out[kStateDim]) const;

private:
    std::size_t idx(int env, int drone) const {
        return static_cast<std::size_t>(env) * agents_ + drone;
    }
    Vec3 drone_nominal_start(int drone) const;
    Vec3 agent_target(int drone) const;
    void reset_slot(int s);
    void step_slot(int s, const double* actions);
    void map_action(int s, int d, const double* a);
    void build_obs(int s);
    double reward_hover_style(int s, int d, const Vec3& goal, double action_delta_sq) const;

    TaskSpec task_;
    SimParams sim_;
    RandomizationSpec rand_;
    ModelEntry entry_;
    AllocationMatrix alloc_;  // nominal, used by the transformed control modes
    bool has_alloc_ = false;

    int num_envs_ = 0;
    int agents_ = 1;
    int obs_dim_ = 0;
    int act_dim_ = 0;
    int rotors_ = 0;
    int tilt_groups_ = 0;
    double hover_throttle_ = 0.5;
    double z_crash_eff_ = 0.1;
    double cos_tilt_limit_ = 0.0;
    double cos_link_tilt_limit_ = 0.5;
    ThreadPool* pool_ = nullptr;

    // per (env, drone)
    std::vector<BodyState> bodies_;
    std::vector<MotorState> motors_;
    std::vector<MotorState> motor_targets_;
    std::vector<TiltState> tilts_;
    std::vector<TiltState> tilt_targets_;
    std::vector<VelCtrlState> vel_mem_;
    std::vector<double> prev_action_;  // N·agents·act_dim

    // per env
    std::vector<DroneModel> models_;
    std::vector<LinkConfig> links_;
    std::vector<Vec3> link_dir_;
    std::vector<Vec3> link_omega_;
    std::vector<Vec3> wind_;
    std::vector<Rng> rng_state_;
    std::vector<Rng> rng_dr_;
    std::vector<std::uint64_t> slot_seed_;
    std::vector<int> episode_;
    std::vector<int> steps_;

    // step results
    std::vector<double> obs_;
    std::vector<double> rewards_;
    std::vector<std::uint8_t> terminated_;
    std::vector<std::uint8_t> truncated_;
    std::vector<double> metric_;
    std::vector<std::uint8_t> collided_;
    std::vector<std::uint8_t> gate_passed_;
    std::vector<std::uint8_t> gate_sticky_;
};

}  // namespace dronesim
