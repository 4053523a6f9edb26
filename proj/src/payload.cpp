#include "dronesim/payload.hpp"

namespace dronesim {

// Newton on both bodies with the link force c·ρ eliminated analytically:
//   m_d a_d = F_d + c ρ            (F_d = thrust + gravity + drag + external)
//   m_p a_p = m_p g − c ρ
//   a_p − a_d = L ω̇_l × ρ − L |ω_l|² ρ   (ρ̈ of a unit vector, ω_l ⊥ ρ)
// Projecting on ρ gives the tension, projecting on ρ⊥ gives ω̇_l. The m_p → 0
// limit leaves c = 0 and recovers the bare drone bit-for-bit.
PendulumState step_coupled(const PendulumState& state, MotorState& motors,
                           const MotorState& motor_target, const DroneModel& model,
                           const LinkConfig& cfg, const Vec3& external_force_world,
                           const SimParams& params) {
    const double dt = params.physics_dt();
    const double m_d = model.mass;
    const double m_p = cfg.payload_mass;
    const double mu = m_d * m_p / (m_d + m_p);
    const double L = cfg.length;

    PendulumState s = state;
    for (int k = 0; k < params.substeps; ++k) {
        motor_step(motors, motor_target, model, dt);
        const Wrench w = rotor_wrench(model, motors);
        const Vec3 F_d =
            drone_applied_force(s.drone, w, model, params.gravity, external_force_world);

        const Vec3 rel = params.gravity - F_d / m_d;  // a_p − a_d before the link force
        const double c = mu * (dot(rel, s.link_dir) + L * s.link_omega.squared_norm());
        const Vec3 accel = (F_d + s.link_dir * c) / m_d;
        const Vec3 omega_dot = drone_angular_accel(s.drone, w, model);
        const Vec3 link_omega_dot = cross(s.link_dir, rel) / L;

        s.drone = integrate_rigid_body(s.drone, accel, omega_dot, dt);
        s.link_omega += link_omega_dot * dt;
        const double ang = s.link_omega.norm() * dt;
        if (ang > 0.0) {
            const Quat dq = quat_from_axis_angle(s.link_omega.normalized(), ang);
            s.link_dir = quat_rotate(dq, s.link_dir).normalized();
            // keep ω_l in the plane normal to the link
            s.link_omega -= s.link_dir * dot(s.link_omega, s.link_dir);
        }
    }
    return s;
}

}  // namespace dronesim
