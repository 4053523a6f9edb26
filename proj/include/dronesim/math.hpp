#pragma once

#include <cmath>
#include <cstdint>

namespace dronesim {

// ============================================================================
// Vec3
// ============================================================================
struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3& operator+=(const Vec3& o) {
        x += o.x; y += o.y; z += o.z;
        return *this;
    }
    constexpr Vec3& operator-=(const Vec3& o) {
        x -= o.x; y -= o.y; z -= o.z;
        return *this;
    }
    constexpr Vec3& operator*=(double s) {
        x *= s; y *= s; z *= s;
        return *this;
    }
    // component-wise product
    constexpr Vec3 cwise(const Vec3& o) const { return {x * o.x, y * o.y, z * o.z}; }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    constexpr double squared_norm() const { return x * x + y * y + z * z; }
    Vec3 normalized() const {
        const double n = norm();
        return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{};
    }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// ============================================================================
// Quat — Hamilton convention, scalar-first (w,x,y,z).
// Represents the passive body-to-world rotation: world = R(q) * body.
// ============================================================================
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    static constexpr Quat identity() { return {1.0, 0.0, 0.0, 0.0}; }

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    Quat normalized() const {
        const double n = norm();
        return {w / n, x / n, y / n, z / n};
    }
    constexpr Quat conj() const { return {w, -x, -y, -z}; }
    constexpr Quat operator-() const { return {-w, -x, -y, -z}; }
    bool finite() const {
        return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

// Hamilton product a ⊗ b.
constexpr Quat quat_mul(const Quat& a, const Quat& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

// Rotate v by q (body -> world for a body orientation quaternion).
// v' = v + 2w(q_v × v) + 2 q_v × (q_v × v), valid for unit q.
constexpr Vec3 quat_rotate(const Quat& q, const Vec3& v) {
    const Vec3 qv{q.x, q.y, q.z};
    const Vec3 t = cross(qv, v);
    const Vec3 u = cross(qv, t);
    return {v.x + 2.0 * (q.w * t.x + u.x),
            v.y + 2.0 * (q.w * t.y + u.y),
            v.z + 2.0 * (q.w * t.z + u.z)};
}

inline Quat quat_from_axis_angle(const Vec3& axis_unit, double angle) {
    const double h = 0.5 * angle;
    const double s = std::sin(h);
    return {std::cos(h), axis_unit.x * s, axis_unit.y * s, axis_unit.z * s};
}

// Exponential-map attitude update: q ⊗ exp(½ ω dt), renormalized.
// ω is the body-frame angular velocity. dt = 0 (or ω = 0) returns q exactly.
inline Quat quat_integrate(const Quat& q, const Vec3& omega_body, double dt) {
    const Vec3 phi = omega_body * dt;
    const double angle = phi.norm();
    if (angle == 0.0) return q;
    double k;  // sin(angle/2) / angle
    if (angle < 1e-8) {
        k = 0.5 - angle * angle * (1.0 / 48.0);
    } else {
        k = std::sin(0.5 * angle) / angle;
    }
    const Quat dq{std::cos(0.5 * angle), phi.x * k, phi.y * k, phi.z * k};
    return quat_mul(q, dq).normalized();
}

// Yaw (rotation of the body x-axis about world z), for observation/targets.
inline double quat_yaw(const Quat& q) {
    const Vec3 xb = quat_rotate(q, {1.0, 0.0, 0.0});
    return std::atan2(xb.y, xb.x);
}

inline Quat quat_from_rpy(double roll, double pitch, double yaw) {
    const Quat qr = quat_from_axis_angle({1, 0, 0}, roll);
    const Quat qp = quat_from_axis_angle({0, 1, 0}, pitch);
    const Quat qy = quat_from_axis_angle({0, 0, 1}, yaw);
    return quat_mul(quat_mul(qy, qp), qr);
}

// Shepperd's method; columns are the body axes expressed in world frame.
inline Quat quat_from_basis(const Vec3& xb, const Vec3& yb, const Vec3& zb) {
    const double m00 = xb.x, m01 = yb.x, m02 = zb.x;
    const double m10 = xb.y, m11 = yb.y, m12 = zb.y;
    const double m20 = xb.z, m21 = yb.z, m22 = zb.z;
    const double tr = m00 + m11 + m22;
    Quat q;
    if (tr > 0.0) {
        double s = std::sqrt(tr + 1.0) * 2.0;
        q.w = 0.25 * s;
        q.x = (m21 - m12) / s;
        q.y = (m02 - m20) / s;
        q.z = (m10 - m01) / s;
    } else if (m00 > m11 && m00 > m22) {
        double s = std::sqrt(1.0 + m00 - m11 - m22) * 2.0;
        q.w = (m21 - m12) / s;
        q.x = 0.25 * s;
        q.y = (m01 + m10) / s;
        q.z = (m02 + m20) / s;
    } else if (m11 > m22) {
        double s = std::sqrt(1.0 + m11 - m00 - m22) * 2.0;
        q.w = (m02 - m20) / s;
        q.x = (m01 + m10) / s;
        q.y = 0.25 * s;
        q.z = (m12 + m21) / s;
    } else {
        double s = std::sqrt(1.0 + m22 - m00 - m11) * 2.0;
        q.w = (m10 - m01) / s;
        q.x = (m02 + m20) / s;
        q.y = (m12 + m21) / s;
        q.z = 0.25 * s;
    }
    return q.normalized();
}

// ============================================================================
// Rigid-body state and integration
// ============================================================================
struct BodyState {
    Vec3 pos_world;                  // x_W [m]
    Quat quat = Quat::identity();    // body -> world
    Vec3 vel_world;                  // v_W [m/s]
    Vec3 omega_body;                 // ω   [rad/s]
};

struct SimParams {
    double dt_control = 0.016;       // control period [s] (~60 Hz policy rate)
    int substeps = 4;                // physics sub-steps per control step
    Vec3 gravity{0.0, 0.0, -9.81};   // [m/s²]

    double physics_dt() const { return dt_control / static_cast<double>(substeps); }
};

// Semi-implicit (symplectic) Euler: velocity first, then position with the
// new velocity; orientation from the updated body rate.
inline BodyState integrate_rigid_body(const BodyState& s, const Vec3& accel_world,
                                      const Vec3& omega_dot_body, double dt) {
    BodyState out;
    out.vel_world = s.vel_world + accel_world * dt;
    out.pos_world = s.pos_world + out.vel_world * dt;
    out.omega_body = s.omega_body + omega_dot_body * dt;
    out.quat = quat_integrate(s.quat, out.omega_body, dt);
    return out;
}

}  // namespace dronesim
