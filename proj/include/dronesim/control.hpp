#pragma once

#include <array>

#include "dronesim/airframe.hpp"

namespace dronesim {

enum class ControlMode { Rotor, Velocity, Rate, Attitude };

struct PdGains {
    Vec3 rate_kp{0.2, 0.2, 0.05};      // torque per rad/s of body-rate error
    Vec3 attitude_kp{10.0, 10.0, 4.0}; // commanded rate per unit attitude error
    Vec3 vel_kp{3.5, 3.5, 3.5};        // commanded accel per m/s of velocity error
    Vec3 vel_kd{0.25, 0.25, 0.25};     // damping on the filtered accel estimate
};

// Linear map B from per-rotor throttles to (collective body-z thrust, 3 body
// torques), with its minimum-norm right pseudo-inverse. Only valid for
// airframes whose rotors all thrust along body +z.
struct AllocationMatrix {
    int n = 0;
    std::array<double, 4 * kMaxRotors> B{};       // row-major 4×n
    std::array<double, kMaxRotors * 4> B_pinv{};  // row-major n×4

    // throttles -> (thrust, torque)
    std::array<double, 4> apply(const MotorState& m) const {
        std::array<double, 4> w{};
        for (int r = 0; r < 4; ++r) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += B[r * kMaxRotors + i] * m.throttle[i];
            w[r] = acc;
        }
        return w;
    }
    // (thrust, torque) -> throttles, no clamping
    MotorState allocate(const std::array<double, 4>& w) const {
        MotorState m;
        m.count = n;
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int r = 0; r < 4; ++r) acc += B_pinv[i * 4 + r] * w[r];
            m.throttle[i] = acc;
        }
        return m;
    }
};

// Throws std::invalid_argument for tilted airframes or rank(B) < 4 layouts.
AllocationMatrix build_allocation(const DroneModel& model);

// Proportional rate loop (P on rate = attitude-level D); output clamped to [0,1]^n.
MotorState rate_control(const BodyState& state, const Vec3& target_rates,
                        double collective_thrust, const PdGains& gains,
                        const AllocationMatrix& alloc);

// Quaternion attitude error (shorter-rotation sign convention) cascaded into
// the rate loop.
MotorState attitude_control(const BodyState& state, const Quat& target_quat,
                            double collective_thrust, const PdGains& gains,
                            const AllocationMatrix& alloc);

// One-step finite-difference acceleration estimate with a one-step low-pass,
// kept per environment by the caller.
struct VelCtrlState {
    Vec3 prev_vel;
    Vec3 accel_lp;
    bool primed = false;
};

// PD velocity loop mapped to a tilt-limited attitude target plus collective
// thrust, cascaded into the attitude loop. Desired tilt beyond 60° is clamped.
MotorState velocity_control(const BodyState& state, const Vec3& target_vel, double target_yaw,
                            const DroneModel& model, const Vec3& gravity, double dt,
                            VelCtrlState& mem, const PdGains& gains,
                            const AllocationMatrix& alloc);

}  // namespace dronesim
