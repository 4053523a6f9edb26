#include "dronesim/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dronesim {

namespace {

constexpr double kMaxTiltRad = 1.0471975511965976;  // 60°

// Solve the 4×4 system M·X = R for X (R is 4×n), Gaussian elimination with
// partial pivoting. Returns false when M is singular at the given tolerance.
bool solve4(std::array<double, 16> M, double* R, int n, double rel_tol) {
    double max_abs = 0.0;
    for (double v : M) max_abs = std::max(max_abs, std::abs(v));
    const double tol = rel_tol * std::max(max_abs, 1e-300);
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r) {
            if (std::abs(M[r * 4 + col]) > std::abs(M[piv * 4 + col])) piv = r;
        }
        if (std::abs(M[piv * 4 + col]) < tol) return false;
        if (piv != col) {
            for (int j = 0; j < 4; ++j) std::swap(M[col * 4 + j], M[piv * 4 + j]);
            for (int j = 0; j < n; ++j)
                std::swap(R[col * kMaxRotors + j], R[piv * kMaxRotors + j]);
        }
        const double d = M[col * 4 + col];
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = M[r * 4 + col] / d;
            if (f == 0.0) continue;
            for (int j = col; j < 4; ++j) M[r * 4 + j] -= f * M[col * 4 + j];
            for (int j = 0; j < n; ++j) R[r * kMaxRotors + j] -= f * R[col * kMaxRotors + j];
        }
    }
    for (int r = 0; r < 4; ++r) {
        const double d = M[r * 4 + r];
        for (int j = 0; j < n; ++j) R[r * kMaxRotors + j] /= d;
    }
    return true;
}

}  // namespace

AllocationMatrix build_allocation(const DroneModel& model) {
    const int n = model.num_rotors();
    if (n < 3 || n > kMaxRotors) throw std::invalid_argument("allocation: bad rotor count");
    AllocationMatrix a;
    a.n = n;
    for (int i = 0; i < n; ++i) {
        const RotorParams& r = model.rotors[i];
        const Vec3 axis = quat_rotate(r.tilt_body, Vec3{0.0, 0.0, 1.0});
        if (r.tilt_group >= 0 || std::abs(axis.x) > 1e-9 || std::abs(axis.y) > 1e-9 ||
            axis.z < 0.0) {
            throw std::invalid_argument(
                "allocation: airframe '" + model.name +
                "' has tilted rotors; only rotor control mode is supported");
        }
        a.B[0 * kMaxRotors + i] = r.max_thrust;
        a.B[1 * kMaxRotors + i] = r.position_body.y * r.max_thrust;
        a.B[2 * kMaxRotors + i] = -r.position_body.x * r.max_thrust;
        a.B[3 * kMaxRotors + i] = r.spin_sign * r.force_to_moment * r.max_thrust;
    }
    // Minimum-norm right inverse: B_pinv = Bᵀ (B Bᵀ)⁻¹.
    std::array<double, 16> M{};
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += a.B[r * kMaxRotors + i] * a.B[c * kMaxRotors + i];
            M[r * 4 + c] = acc;
        }
    }
    std::array<double, 4 * kMaxRotors> X = a.B;  // becomes (B Bᵀ)⁻¹ B
    if (!solve4(M, X.data(), n, 1e-12)) {
        throw std::invalid_argument("allocation: airframe '" + model.name +
                                    "' is rank deficient (rank(B) < 4)");
    }
    for (int i = 0; i < n; ++i) {
        for (int r = 0; r < 4; ++r) a.B_pinv[i * 4 + r] = X[r * kMaxRotors + i];
    }
    return a;
}

MotorState rate_control(const BodyState& state, const Vec3& target_rates,
                        double collective_thrust, const PdGains& gains,
                        const AllocationMatrix& alloc) {
    const Vec3 err = target_rates - state.omega_body;
    const Vec3 torque = gains.rate_kp.cwise(err);
    MotorState m = alloc.allocate({collective_thrust, torque.x, torque.y, torque.z});
    for (int i = 0; i < m.count; ++i) m.throttle[i] = std::clamp(m.throttle[i], 0.0, 1.0);
    return m;
}

MotorState attitude_control(const BodyState& state, const Quat& target_quat,
                            double collective_thrust, const PdGains& gains,
                            const AllocationMatrix& alloc) {
    Quat qe = quat_mul(state.quat.conj(), target_quat);
    if (qe.w < 0.0) qe = -qe;  // command the shorter rotation
    const Vec3 err{qe.x, qe.y, qe.z};
    return rate_control(state, gains.attitude_kp.cwise(err), collective_thrust, gains, alloc);
}

MotorState velocity_control(const BodyState& state, const Vec3& target_vel, double target_yaw,
                            const DroneModel& model, const Vec3& gravity, double dt,
                            VelCtrlState& mem, const PdGains& gains,
                            const AllocationMatrix& alloc) {
    Vec3 accel_raw;
    if (mem.primed && dt > 0.0) accel_raw = (state.vel_world - mem.prev_vel) / dt;
    mem.accel_lp = (mem.accel_lp + accel_raw) * 0.5;
    mem.prev_vel = state.vel_world;
    mem.primed = true;

    const Vec3 a_des = gains.vel_kp.cwise(target_vel - state.vel_world) -
                       gains.vel_kd.cwise(mem.accel_lp);
    Vec3 f_des = a_des - gravity;  // desired specific force, world frame
    const double g = gravity.norm();
    const double min_up = 0.2 * (g > 0.0 ? g : 9.81);
    if (f_des.z < min_up) f_des.z = min_up;
    // tilt clamp: cap the horizontal component at tan(60°) of the vertical one
    const double h = std::sqrt(f_des.x * f_des.x + f_des.y * f_des.y);
    const double h_max = std::tan(kMaxTiltRad) * f_des.z;
    if (h > h_max) {
        const double s = h_max / h;
        f_des.x *= s;
        f_des.y *= s;
    }

    const Vec3 zb = f_des.normalized();
    const Vec3 xc{std::cos(target_yaw), std::sin(target_yaw), 0.0};
    const Vec3 yb = cross(zb, xc).normalized();
    const Vec3 xb = cross(yb, zb);
    const Quat q_t = quat_from_basis(xb, yb, zb);

    const Vec3 body_z = quat_rotate(state.quat, Vec3{0.0, 0.0, 1.0});
    const double thrust = std::max(0.0, model.mass * dot(f_des, body_z));
    return attitude_control(state, q_t, thrust, gains, alloc);
}

}  // namespace dronesim
