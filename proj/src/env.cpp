#include "dronesim/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dronesim {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double d) { return d * kPi / 180.0; }
}  // namespace

EnvBatch::EnvBatch(const TaskSpec& task, const SimParams& sim, const RandomizationSpec& rand,
                   const ModelEntry& entry, int num_envs, std::uint64_t seed, ThreadPool* pool)
    : task_(task), sim_(sim), rand_(rand), entry_(entry), pool_(pool) {
    task_.validate();
    if (num_envs < 1) throw std::invalid_argument("env: num_envs must be >= 1");
    if (!rand_.well_ordered()) throw std::invalid_argument("env: randomization ranges malformed");
    num_envs_ = num_envs;
    agents_ = task_.num_drones;
    rotors_ = entry_.model.num_rotors();
    tilt_groups_ = entry_.model.num_tilt_groups;

    if (task_.kind == TaskKind::Formation && task_.formation_offsets.empty()) {
        task_.formation_offsets = default_formation_offsets(agents_);
    }

    if (task_.control_mode == ControlMode::Rotor) {
        act_dim_ = rotors_ + tilt_groups_;
    } else {
        act_dim_ = 4;
        alloc_ = build_allocation(entry_.model);  // rejects tilted airframes
        has_alloc_ = true;
    }

    const int rel = task_.kind == TaskKind::Track ? 3 * task_.track_lookahead : 3;
    obs_dim_ = rel + 4 + 3 + 3 + rotors_ + tilt_groups_ + 1;
    if (task_.kind == TaskKind::FlyThrough) obs_dim_ += 3;
    if (task_.is_payload_task()) obs_dim_ += 6;
    if (task_.kind == TaskKind::Formation) obs_dim_ += (agents_ - 1) * 6;

    const double g = sim_.gravity.norm();
    hover_throttle_ = entry_.model.hover_throttle(g);
    z_crash_eff_ = task_.z_crash + (task_.kind == TaskKind::PayloadHover ? task_.link.length : 0.0);
    cos_tilt_limit_ = std::cos(deg2rad(task_.tilt_limit_deg));
    cos_link_tilt_limit_ = std::cos(deg2rad(task_.link_tilt_limit_deg));

    const std::size_t na = static_cast<std::size_t>(num_envs_) * agents_;
    bodies_.resize(na);
    motors_.resize(na);
    motor_targets_.resize(na);
    tilts_.resize(na);
    tilt_targets_.resize(na);
    vel_mem_.resize(na);
    prev_action_.assign(na * act_dim_, 0.0);

    models_.assign(num_envs_, entry_.model);
    links_.assign(num_envs_, task_.link);
    link_dir_.resize(num_envs_);
    link_omega_.resize(num_envs_);
    wind_.resize(num_envs_);
    rng_state_.resize(num_envs_);
    rng_dr_.resize(num_envs_);
    slot_seed_.assign(num_envs_, seed);
    episode_.assign(num_envs_, 0);
    steps_.assign(num_envs_, 0);

    obs_.assign(na * obs_dim_, 0.0);
    rewards_.assign(na, 0.0);
    terminated_.assign(num_envs_, 0);
    truncated_.assign(num_envs_, 0);
    metric_.assign(num_envs_, 0.0);
    collided_.assign(num_envs_, 0);
    gate_passed_.assign(num_envs_, 0);
    gate_sticky_.assign(num_envs_, 0);

    reset_all(seed);
}

Vec3 EnvBatch::drone_nominal_start(int drone) const {
    if (task_.kind == TaskKind::Formation) return task_.start + task_.formation_offsets[drone];
    return task_.start;
}

Vec3 EnvBatch::agent_target(int drone) const {
    if (task_.kind == TaskKind::Formation) return task_.target + task_.formation_offsets[drone];
    if (task_.kind == TaskKind::FlyThrough) return task_.flythrough_goal;
    return task_.target;
}

void EnvBatch::reset_all(std::uint64_t seed) {
    for (int s = 0; s < num_envs_; ++s) {
        slot_seed_[s] = seed;
        episode_[s] = 0;
        reset_slot(s);
        build_obs(s);
    }
}

void EnvBatch::reset_slots(const int* indices, int count, std::uint64_t seed) {
    for (int i = 0; i < count; ++i) {
        const int s = indices[i];
        if (s < 0 || s >= num_envs_) throw std::invalid_argument("env: reset index out of range");
        slot_seed_[s] = seed;
        episode_[s] = 0;
        reset_slot(s);
        build_obs(s);
    }
}

void EnvBatch::reset_slot(int s) {
    rng_state_[s].seed(mix_seed(slot_seed_[s], static_cast<std::uint64_t>(s), episode_[s], 0));
    rng_dr_[s].seed(mix_seed(slot_seed_[s], static_cast<std::uint64_t>(s), episode_[s], 1));
    Rng& rng = rng_state_[s];

    sample_startup(rand_, rng_dr_[s], entry_.model, models_[s]);
    links_[s] = sample_link(rand_, rng_dr_[s], task_.link);

    const double g = sim_.gravity.norm();
    const double hover = models_[s].hover_throttle(g) * (task_.is_payload_task()
                             ? (models_[s].mass + links_[s].payload_mass) / models_[s].mass
                             : 1.0);
    for (int d = 0; d < agents_; ++d) {
        const std::size_t i = idx(s, d);
        BodyState b;
        const Vec3 nominal = drone_nominal_start(d);
        const double half = 0.5 * task_.init_pos_box;
        b.pos_world = {nominal.x + rng.uniform(-half, half), nominal.y + rng.uniform(-half, half),
                       nominal.z + rng.uniform(-half, half)};
        const double axis_angle = rng.uniform(0.0, 2.0 * kPi);
        const double tilt = rng.uniform(0.0, task_.init_tilt_max);
        b.quat = quat_from_axis_angle({std::cos(axis_angle), std::sin(axis_angle), 0.0}, tilt);
        const double vs = task_.init_vel_sigma;
        b.vel_world = {vs * rng.normal(), vs * rng.normal(), vs * rng.normal()};
        b.omega_body = {vs * rng.normal(), vs * rng.normal(), vs * rng.normal()};
        bodies_[i] = b;
        motors_[i] = MotorState::uniform(rotors_, std::clamp(hover, 0.0, 1.0));
        motor_targets_[i] = motors_[i];
        tilts_[i] = TiltState{};
        tilts_[i].count = tilt_groups_;
        tilt_targets_[i] = tilts_[i];
        vel_mem_[i] = VelCtrlState{};
        std::fill_n(prev_action_.begin() + i * act_dim_, act_dim_, 0.0);
    }

    if (task_.is_payload_task()) {
        const double up = task_.link.direction == LinkDirection::Above ? 1.0 : -1.0;
        const double axis_angle = rng.uniform(0.0, 2.0 * kPi);
        const double tilt = rng.uniform(0.0, 0.5 * task_.init_tilt_max);
        const Quat qt =
            quat_from_axis_angle({std::cos(axis_angle), std::sin(axis_angle), 0.0}, tilt);
        link_dir_[s] = quat_rotate(qt, Vec3{0.0, 0.0, up});
        Vec3 w{0.5 * task_.init_vel_sigma * rng.normal(), 0.5 * task_.init_vel_sigma * rng.normal(),
               0.5 * task_.init_vel_sigma * rng.normal()};
        link_omega_[s] = w - link_dir_[s] * dot(w, link_dir_[s]);
    } else {
        link_dir_[s] = {0.0, 0.0, -1.0};
        link_omega_[s] = {};
    }

    wind_[s] = {};
    steps_[s] = 0;
    gate_sticky_[s] = 0;
    gate_passed_[s] = 0;
    collided_[s] = 0;
    terminated_[s] = 0;
    truncated_[s] = 0;
    metric_[s] = 0.0;
}

void EnvBatch::map_action(int s, int d, const double* a) {
    const std::size_t i = idx(s, d);
    MotorState& tgt = motor_targets_[i];
    if (task_.control_mode == ControlMode::Rotor) {
        tgt.count = rotors_;
        for (int r = 0; r < rotors_; ++r) tgt.throttle[r] = 0.5 * (a[r] + 1.0);
        TiltState& tt = tilt_targets_[i];
        tt.count = tilt_groups_;
        for (int t = 0; t < tilt_groups_; ++t) {
            tt.angle[t] = a[rotors_ + t] * entry_.model.tilt_max;
        }
        return;
    }
    const DroneModel& nominal = entry_.model;
    const double g = sim_.gravity.norm();
    const double thrust = (a[3] + 1.0) * nominal.mass * g;  // [0, 2mg]
    switch (task_.control_mode) {
        case ControlMode::Velocity: {
            const Vec3 v_t{a[0] * task_.vel_cmd_max, a[1] * task_.vel_cmd_max,
                           a[2] * task_.vel_cmd_max};
            const double yaw_t = a[3] * kPi;
            tgt = velocity_control(bodies_[i], v_t, yaw_t, nominal, sim_.gravity,
                                   sim_.dt_control, vel_mem_[i], entry_.gains, alloc_);
            break;
        }
        case ControlMode::Rate: {
            const Vec3 rates{a[0] * task_.rate_cmd_max, a[1] * task_.rate_cmd_max,
                             a[2] * task_.rate_cmd_max};
            tgt = rate_control(bodies_[i], rates, thrust, entry_.gains, alloc_);
            break;
        }
        case ControlMode::Attitude: {
            const double lim = deg2rad(task_.att_cmd_max_deg);
            const Quat q_t = quat_from_rpy(a[0] * lim, a[1] * lim, a[2] * kPi);
            tgt = attitude_control(bodies_[i], q_t, thrust, entry_.gains, alloc_);
            break;
        }
        default: break;
    }
}

double EnvBatch::reward_hover_style(int s, int d, const Vec3& goal,
                                    double action_delta_sq) const {
    const BodyState& b = bodies_[idx(s, d)];
    const Vec3 bz = quat_rotate(b.quat, Vec3{0.0, 0.0, 1.0});
    const double pos_term = std::exp(-(goal - b.pos_world).norm());
    const double up_term = task_.lambda_up * std::max(0.0, bz.z);
    const double spin_term = task_.lambda_spin * std::exp(-b.omega_body.norm());
    return pos_term + up_term + spin_term - task_.lambda_action * action_delta_sq;
}

void EnvBatch::step_slot(int s, const double* actions) {
    // 1) action mapping at the control rate
    double clamped[kMaxRotors + kMaxTiltGroups];
    double delta_sq[16];  // per drone ‖a − a_prev‖², agents_ <= 16 enforced below
    for (int d = 0; d < agents_; ++d) {
        const std::size_t i = idx(s, d);
        const double* a_raw = actions + i * act_dim_;
        double* prev = prev_action_.data() + i * act_dim_;
        double ds = 0.0;
        for (int k = 0; k < act_dim_; ++k) {
            clamped[k] = std::clamp(a_raw[k], -1.0, 1.0);
            const double diff = clamped[k] - prev[k];
            ds += diff * diff;
        }
        delta_sq[d] = ds;
        map_action(s, d, clamped);
        for (int k = 0; k < act_dim_; ++k) prev[k] = clamped[k];
    }

    // 2) disturbance + physics (one control step)
    if (rand_.enabled && rand_.wind.enabled) {
        wind_[s] = wind_step(wind_[s], rand_.wind, rng_dr_[s], sim_.dt_control);
    }
    Vec3 prev_pos[16];
    for (int d = 0; d < agents_; ++d) prev_pos[d] = bodies_[idx(s, d)].pos_world;

    if (task_.is_payload_task()) {
        const std::size_t i = idx(s, 0);
        PendulumState ps{bodies_[i], link_dir_[s], link_omega_[s]};
        ps = step_coupled(ps, motors_[i], motor_targets_[i], models_[s], links_[s], wind_[s],
                          sim_);
        bodies_[i] = ps.drone;
        link_dir_[s] = ps.link_dir;
        link_omega_[s] = ps.link_omega;
    } else {
        for (int d = 0; d < agents_; ++d) {
            const std::size_t i = idx(s, d);
            bodies_[i] = step_drone(bodies_[i], motors_[i], motor_targets_[i], models_[s],
                                    wind_[s], sim_, &tilts_[i], &tilt_targets_[i]);
        }
    }
    steps_[s] += 1;

    // 3) rewards, termination, task metric
    bool term = false;
    bool collision = false;
    collided_[s] = 0;
    const double t_now = steps_[s] * sim_.dt_control;

    if (task_.kind == TaskKind::Formation) {
        Vec3 centroid;
        for (int d = 0; d < agents_; ++d) centroid += bodies_[idx(s, d)].pos_world;
        centroid = centroid / static_cast<double>(agents_);
        double ferr = 0.0;
        for (int d = 0; d < agents_; ++d) {
            ferr += ((bodies_[idx(s, d)].pos_world - centroid) - task_.formation_offsets[d])
                        .norm();
        }
        ferr /= static_cast<double>(agents_);
        for (int a = 0; a < agents_ && !collision; ++a) {
            for (int b = a + 1; b < agents_; ++b) {
                if ((bodies_[idx(s, a)].pos_world - bodies_[idx(s, b)].pos_world).norm() <
                    task_.d_safe) {
                    collision = true;
                    break;
                }
            }
        }
        double r = std::exp(-ferr) + 0.3 * std::exp(-(centroid - task_.target).norm());
        if (collision) {
            r -= task_.formation_collision_penalty;
            term = true;
            collided_[s] = 1;
        }
        for (int d = 0; d < agents_; ++d) rewards_[idx(s, d)] = r;
        metric_[s] = ferr;
    } else {
        Vec3 goal = task_.target;
        if (task_.kind == TaskKind::Track) goal = task_.trajectory().position(t_now);
        if (task_.kind == TaskKind::FlyThrough) goal = task_.flythrough_goal;
        double r = reward_hover_style(s, 0, goal, delta_sq[0]);
        if (task_.kind == TaskKind::FlyThrough) {
            const int cross = task_.gate.classify_segment(prev_pos[0], bodies_[idx(s, 0)].pos_world);
            if (cross == 1 && !gate_sticky_[s]) {
                gate_sticky_[s] = 1;
                r += task_.gate_bonus;
            } else if (cross == 2) {
                collision = true;
                collided_[s] = 1;
                term = true;
                r -= task_.collision_penalty;
            }
        }
        rewards_[idx(s, 0)] = r;
        metric_[s] = (goal - bodies_[idx(s, 0)].pos_world).norm();
    }

    // common failure predicates
    for (int d = 0; d < agents_; ++d) {
        const BodyState& b = bodies_[idx(s, d)];
        if (b.pos_world.z < z_crash_eff_) term = true;
        if (task_.kind != TaskKind::InvPendulumHover) {
            const Vec3 bz = quat_rotate(b.quat, Vec3{0.0, 0.0, 1.0});
            if (bz.z < cos_tilt_limit_) term = true;
        }
        if ((b.pos_world - task_.target).norm() > task_.workspace_radius) term = true;
        if (!b.pos_world.finite() || !b.vel_world.finite() || !b.omega_body.finite()) term = true;
    }
    if (task_.kind == TaskKind::InvPendulumHover && link_dir_[s].z < cos_link_tilt_limit_) {
        term = true;
    }

    terminated_[s] = term ? 1 : 0;
    truncated_[s] = (!term && steps_[s] >= task_.episode_len) ? 1 : 0;
    gate_passed_[s] = gate_sticky_[s];

    if (term || truncated_[s]) {
        const std::uint8_t passed = gate_passed_[s];
        episode_[s] += 1;
        reset_slot(s);
        // keep this step's outcome flags visible alongside the fresh observation
        terminated_[s] = term ? 1 : 0;
        truncated_[s] = (!term) ? 1 : 0;
        if (collision) collided_[s] = 1;
        gate_passed_[s] = passed;
    }
    build_obs(s);
}

void EnvBatch::step(const double* actions, std::size_t len) {
    const std::size_t expect =
        static_cast<std::size_t>(num_envs_) * agents_ * static_cast<std::size_t>(act_dim_);
    if (len != expect) {
        throw std::invalid_argument("env: action buffer has " + std::to_string(len) +
                                    " elements, expected " + std::to_string(expect));
    }
    if (agents_ > 16) throw std::invalid_argument("env: more than 16 drones per slot unsupported");
    auto body = [&](std::size_t b, std::size_t e) {
        for (std::size_t s = b; s < e; ++s) step_slot(static_cast<int>(s), actions);
    };
    maybe_parallel_for(pool_, static_cast<std::size_t>(num_envs_), body);
}

void EnvBatch::build_obs(int s) {
    const double t_now = steps_[s] * sim_.dt_control;
    const double time_frac =
        static_cast<double>(task_.episode_len - steps_[s]) / task_.episode_len;
    for (int d = 0; d < agents_; ++d) {
        const std::size_t i = idx(s, d);
        const BodyState& b = bodies_[i];
        double* o = obs_.data() + i * obs_dim_;
        int k = 0;
        if (task_.kind == TaskKind::Track) {
            const TrackTrajectory traj = task_.trajectory();
            for (int j = 0; j < task_.track_lookahead; ++j) {
                const Vec3 ref = traj.position(t_now + j * task_.track_lookahead_dt);
                o[k++] = ref.x - b.pos_world.x;
                o[k++] = ref.y - b.pos_world.y;
                o[k++] = ref.z - b.pos_world.z;
            }
        } else {
            const Vec3 goal = agent_target(d);
            o[k++] = goal.x - b.pos_world.x;
            o[k++] = goal.y - b.pos_world.y;
            o[k++] = goal.z - b.pos_world.z;
        }
        o[k++] = b.quat.w;
        o[k++] = b.quat.x;
        o[k++] = b.quat.y;
        o[k++] = b.quat.z;
        o[k++] = b.vel_world.x;
        o[k++] = b.vel_world.y;
        o[k++] = b.vel_world.z;
        o[k++] = b.omega_body.x;
        o[k++] = b.omega_body.y;
        o[k++] = b.omega_body.z;
        for (int r = 0; r < rotors_; ++r) o[k++] = motors_[i].throttle[r];
        for (int t = 0; t < tilt_groups_; ++t) o[k++] = tilts_[i].angle[t];
        o[k++] = time_frac;
        if (task_.kind == TaskKind::FlyThrough) {
            o[k++] = task_.gate.pos.x - b.pos_world.x;
            o[k++] = task_.gate.pos.y - b.pos_world.y;
            o[k++] = task_.gate.pos.z - b.pos_world.z;
        }
        if (task_.is_payload_task()) {
            o[k++] = link_dir_[s].x;
            o[k++] = link_dir_[s].y;
            o[k++] = link_dir_[s].z;
            const Vec3 rel_vel = cross(link_omega_[s], link_dir_[s]) * links_[s].length;
            o[k++] = rel_vel.x;
            o[k++] = rel_vel.y;
            o[k++] = rel_vel.z;
        }
        if (task_.kind == TaskKind::Formation) {
            for (int j = 0; j < agents_; ++j) {
                if (j == d) continue;
                const BodyState& nb = bodies_[idx(s, j)];
                o[k++] = nb.pos_world.x - b.pos_world.x;
                o[k++] = nb.pos_world.y - b.pos_world.y;
                o[k++] = nb.pos_world.z - b.pos_world.z;
                o[k++] = nb.vel_world.x - b.vel_world.x;
                o[k++] = nb.vel_world.y - b.vel_world.y;
                o[k++] = nb.vel_world.z - b.vel_world.z;
            }
        }
    }
}

void EnvBatch::set_body(int env, int drone, const BodyState& b) {
    bodies_[idx(env, drone)] = b;
}

PendulumState EnvBatch::pendulum(int env) const {
    return {bodies_[idx(env, 0)], link_dir_[env], link_omega_[env]};
}

void EnvBatch::set_pendulum(int env, const PendulumState& p) {
    bodies_[idx(env, 0)] = p.drone;
    link_dir_[env] = p.link_dir;
    link_omega_[env] = p.link_omega;
}

void EnvBatch::refresh_observations() {
    for (int s = 0; s < num_envs_; ++s) build_obs(s);
}

void EnvBatch::copy_state(int env, int drone, double out[kStateDim]) const {
    const BodyState& b = bodies_[idx(env, drone)];
    out[0] = b.pos_world.x;
    out[1] = b.pos_world.y;
    out[2] = b.pos_world.z;
    out[3] = b.quat.w;
    out[4] = b.quat.x;
    out[5] = b.quat.y;
    out[6] = b.quat.z;
    out[7] = b.vel_world.x;
    out[8] = b.vel_world.y;
    out[9] = b.vel_world.z;
    out[10] = b.omega_body.x;
    out[11] = b.omega_body.y;
    out[12] = b.omega_body.z;
}

}  // namespace dronesim
