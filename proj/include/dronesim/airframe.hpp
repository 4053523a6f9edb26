#pragma once

#include <array>
#include <string>
#include <vector>

#include "dronesim/math.hpp"

namespace dronesim {

inline constexpr int kMaxRotors = 12;
inline constexpr int kMaxTiltGroups = 6;

struct RotorParams {
    Vec3 position_body;                   // T_B, rotor hub in body frame [m]
    Quat tilt_body = Quat::identity();    // R_B, fixed mount orientation
    double max_thrust = 1.0;              // [N] at throttle 1
    double force_to_moment = 0.016;       // k, spin drag moment per thrust [m]
    double spin_sign = 1.0;               // +1 / -1
    double motor_tau = 0.05;              // [s]; <= 0 selects ideal (lag-free) actuation
    int tilt_group = -1;                  // >= 0: thrust axis rotates about tilt_axis
    Vec3 tilt_axis{1.0, 0.0, 0.0};        // body frame, unit; only used when tilt_group >= 0
};

struct DroneModel {
    std::string name;
    double mass = 1.0;                    // [kg]
    Vec3 inertia_diag{0.01, 0.01, 0.02};  // J diagonal [kg·m²]
    std::vector<RotorParams> rotors;
    double drag_coeff = 0.0;              // linear drag, force = -drag_coeff · v_W [N·s/m]
    int num_tilt_groups = 0;              // > 0 marks a tiltable-arm airframe (omav)
    double tilt_tau = 0.15;               // arm tilt first-order lag [s]
    double tilt_max = 1.5707963267948966; // arm tilt command limit [rad]

    int num_rotors() const { return static_cast<int>(rotors.size()); }
    // Throttle fraction that exactly cancels gravity for untilted rotors.
    double hover_throttle(double g) const;
    bool valid() const;
};

// Per-rotor normalized thrust fractions in [0, 1].
struct MotorState {
    std::array<double, kMaxRotors> throttle{};
    int count = 0;

    static MotorState uniform(int n, double value) {
        MotorState m;
        m.count = n;
        for (int i = 0; i < n; ++i) m.throttle[i] = value;
        return m;
    }
};

// Tilt angles of the tiltable arm groups [rad]; count = 0 on fixed airframes.
struct TiltState {
    std::array<double, kMaxTiltGroups> angle{};
    int count = 0;
};

// Body-frame collective force f and torque η.
struct Wrench {
    Vec3 force_body;
    Vec3 torque_body;
};

// f = Σ R_B⁽ⁱ⁾ f_i, η = Σ T_B⁽ⁱ⁾ × f_i + s_i k_i f_i with f_i linear in throttle.
Wrench rotor_wrench(const DroneModel& model, const MotorState& motors,
                    const TiltState& tilt = {});

// First-order lag toward the target, clamped to [0, 1]. A rotor with
// motor_tau <= 0 follows the target exactly.
void motor_step(MotorState& motors, const MotorState& target, const DroneModel& model, double dt);

void tilt_step(TiltState& tilt, const TiltState& target, const DroneModel& model, double dt);

// One control step = `substeps` physics sub-steps with motor/tilt lag applied
// per sub-step. external_force_world is added to the drag and gravity terms
// (wind and similar disturbances).
BodyState step_drone(const BodyState& state, MotorState& motors, const MotorState& motor_target,
                     const DroneModel& model, const Vec3& external_force_world,
                     const SimParams& params, TiltState* tilt = nullptr,
                     const TiltState* tilt_target = nullptr);

// Applied force on the body in world frame (thrust + gravity + drag + external)
// and the angular acceleration; shared by the bare and coupled steppers.
Vec3 drone_applied_force(const BodyState& state, const Wrench& wrench, const DroneModel& model,
                         const Vec3& gravity, const Vec3& external_force_world);
Vec3 drone_angular_accel(const BodyState& state, const Wrench& wrench, const DroneModel& model);

}  // namespace dronesim
