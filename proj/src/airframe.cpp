#include "dronesim/airframe.hpp"

#include <algorithm>
#include <cmath>

namespace dronesim {

double DroneModel::hover_throttle(double g) const {
    double total_max = 0.0;
    for (const auto& r : rotors) total_max += r.max_thrust;
    return total_max > 0.0 ? mass * g / total_max : 0.0;
}

bool DroneModel::valid() const {
    if (!(mass > 0.0)) return false;
    if (!(inertia_diag.x > 0.0 && inertia_diag.y > 0.0 && inertia_diag.z > 0.0)) return false;
    if (rotors.size() < 3 || rotors.size() > kMaxRotors) return false;
    for (const auto& r : rotors) {
        if (!(r.max_thrust > 0.0)) return false;
        if (r.tilt_group >= kMaxTiltGroups) return false;
    }
    return num_tilt_groups <= kMaxTiltGroups;
}

Wrench rotor_wrench(const DroneModel& model, const MotorState& motors, const TiltState& tilt) {
    Wrench w;
    const int n = model.num_rotors();
    for (int i = 0; i < n; ++i) {
        const RotorParams& r = model.rotors[i];
        const double f = motors.throttle[i] * r.max_thrust;
        Vec3 axis = quat_rotate(r.tilt_body, Vec3{0.0, 0.0, 1.0});
        if (r.tilt_group >= 0 && r.tilt_group < tilt.count) {
            const Quat qt = quat_from_axis_angle(r.tilt_axis, tilt.angle[r.tilt_group]);
            axis = quat_rotate(qt, axis);
        }
        const Vec3 fv = axis * f;
        w.force_body += fv;
        w.torque_body += cross(r.position_body, fv) + fv * (r.spin_sign * r.force_to_moment);
    }
    return w;
}

void motor_step(MotorState& motors, const MotorState& target, const DroneModel& model, double dt) {
    const int n = model.num_rotors();
    motors.count = n;
    for (int i = 0; i < n; ++i) {
        const double tau = model.rotors[i].motor_tau;
        const double alpha = tau > 0.0 ? std::min(dt / tau, 1.0) : 1.0;
        const double t = motors.throttle[i] + alpha * (target.throttle[i] - motors.throttle[i]);
        motors.throttle[i] = std::clamp(t, 0.0, 1.0);
    }
}

void tilt_step(TiltState& tilt, const TiltState& target, const DroneModel& model, double dt) {
    tilt.count = model.num_tilt_groups;
    for (int i = 0; i < model.num_tilt_groups; ++i) {
        const double alpha = model.tilt_tau > 0.0 ? std::min(dt / model.tilt_tau, 1.0) : 1.0;
        const double a = tilt.angle[i] + alpha * (target.angle[i] - tilt.angle[i]);
        tilt.angle[i] = std::clamp(a, -model.tilt_max, model.tilt_max);
    }
}

Vec3 drone_applied_force(const BodyState& state, const Wrench& wrench, const DroneModel& model,
                         const Vec3& gravity, const Vec3& external_force_world) {
    return quat_rotate(state.quat, wrench.force_body) + gravity * model.mass +
           external_force_world - state.vel_world * model.drag_coeff;
}

Vec3 drone_angular_accel(const BodyState& state, const Wrench& wrench, const DroneModel& model) {
    const Vec3& J = model.inertia_diag;
    const Vec3 Jw = state.omega_body.cwise(J);
    const Vec3 gyro = cross(state.omega_body, Jw);
    const Vec3 t = wrench.torque_body - gyro;
    return {t.x / J.x, t.y / J.y, t.z / J.z};
}

BodyState step_drone(const BodyState& state, MotorState& motors, const MotorState& motor_target,
                     const DroneModel& model, const Vec3& external_force_world,
                     const SimParams& params, TiltState* tilt, const TiltState* tilt_target) {
    const double dt = params.physics_dt();
    BodyState s = state;
    for (int k = 0; k < params.substeps; ++k) {
        motor_step(motors, motor_target, model, dt);
        if (tilt != nullptr && tilt_target != nullptr) tilt_step(*tilt, *tilt_target, model, dt);
        const Wrench w = rotor_wrench(model, motors, tilt != nullptr ? *tilt : TiltState{});
        const Vec3 force = drone_applied_force(s, w, model, params.gravity, external_force_world);
        const Vec3 accel = force / model.mass;
        const Vec3 omega_dot = drone_angular_accel(s, w, model);
        s = integrate_rigid_body(s, accel, omega_dot, dt);
    }
    return s;
}

}  // namespace dronesim
