// Independent reference implementations used to check the engine. Everything
// here is deliberately written from first principles (matrix forms, brute
// force sums, finite differences) rather than calling the code under test.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "dronesim/math.hpp"

namespace oracle {

using dronesim::Quat;
using dronesim::Vec3;

// 3×3 rotation matrix from a unit quaternion, standard component formula.
struct Mat3 {
    double m[3][3];
    Vec3 mul(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
};

inline Mat3 rotation_matrix(const Quat& q) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 r;
    r.m[0][0] = 1 - 2 * (y * y + z * z);
    r.m[0][1] = 2 * (x * y - w * z);
    r.m[0][2] = 2 * (x * z + w * y);
    r.m[1][0] = 2 * (x * y + w * z);
    r.m[1][1] = 1 - 2 * (x * x + z * z);
    r.m[1][2] = 2 * (y * z - w * x);
    r.m[2][0] = 2 * (x * z - w * y);
    r.m[2][1] = 2 * (y * z + w * x);
    r.m[2][2] = 1 - 2 * (x * x + y * y);
    return r;
}

// Quaternion product via the 4×4 left-multiplication matrix form.
inline Quat quat_mul_matrix_form(const Quat& a, const Quat& b) {
    const double L[4][4] = {{a.w, -a.x, -a.y, -a.z},
                            {a.x, a.w, -a.z, a.y},
                            {a.y, a.z, a.w, -a.x},
                            {a.z, -a.y, a.x, a.w}};
    const double v[4] = {b.w, b.x, b.y, b.z};
    double r[4] = {0, 0, 0, 0};
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) r[i] += L[i][j] * v[j];
    }
    return {r[0], r[1], r[2], r[3]};
}

inline Quat axis_angle_quat(const Vec3& axis_unit, double angle) {
    return {std::cos(0.5 * angle), axis_unit.x * std::sin(0.5 * angle),
            axis_unit.y * std::sin(0.5 * angle), axis_unit.z * std::sin(0.5 * angle)};
}

inline double quat_angle_between(const Quat& a, const Quat& b) {
    // relative rotation a⁻¹ ⊗ b, angle via atan2 (resolves tiny angles, unlike acos)
    const Quat r = quat_mul_matrix_form(a.conj(), b);
    const double v = std::sqrt(r.x * r.x + r.y * r.y + r.z * r.z);
    return 2.0 * std::atan2(v, std::abs(r.w));
}

// Rank of an m×n matrix by Gaussian elimination with partial pivoting.
inline int matrix_rank(std::vector<std::vector<double>> a, double tol = 1e-9) {
    const int m = static_cast<int>(a.size());
    if (m == 0) return 0;
    const int n = static_cast<int>(a[0].size());
    int rank = 0;
    for (int col = 0; col < n && rank < m; ++col) {
        int piv = rank;
        for (int r = rank + 1; r < m; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        }
        if (std::abs(a[piv][col]) < tol) continue;
        std::swap(a[rank], a[piv]);
        for (int r = 0; r < m; ++r) {
            if (r == rank) continue;
            const double f = a[r][col] / a[rank][col];
            for (int c = col; c < n; ++c) a[r][c] -= f * a[rank][c];
        }
        ++rank;
    }
    return rank;
}

// Segment a→b against the plane x = px with a rectangular opening.
// 0 = no crossing, 1 = through the opening, 2 = wall hit.
inline int segment_gate(const Vec3& a, const Vec3& b, double px, double cy, double cz, double hw,
                        double hh) {
    const double da = a.x - px, db = b.x - px;
    if ((da > 0) == (db > 0) || da == db) return 0;
    const double t = da / (da - db);
    const double y = a.y + t * (b.y - a.y), z = a.z + t * (b.z - a.z);
    return (std::abs(y - cy) <= hw && std::abs(z - cz) <= hh) ? 1 : 2;
}

// Brute-force GAE: A_t = Σ_{l≥0} (γλ)^l δ_{t+l}, stopping at episode ends.
inline std::vector<double> gae_brute_force(const std::vector<double>& rewards,
                                           const std::vector<double>& values,
                                           const std::vector<int>& dones, double bootstrap,
                                           double gamma, double lambda) {
    const int T = static_cast<int>(rewards.size());
    auto value_next = [&](int t) { return t + 1 < T ? values[t + 1] : bootstrap; };
    std::vector<double> adv(T, 0.0);
    for (int t = 0; t < T; ++t) {
        double acc = 0.0, w = 1.0;
        for (int l = t; l < T; ++l) {
            const double nonterm = dones[l] ? 0.0 : 1.0;
            const double delta = rewards[l] + gamma * value_next(l) * nonterm - values[l];
            acc += w * delta;
            if (dones[l]) break;
            w *= gamma * lambda * nonterm;
        }
        adv[t] = acc;
    }
    return adv;
}

// Central finite difference of a scalar function with respect to *x.
inline double central_diff(const std::function<double()>& f, double* x, double h = 1e-6) {
    const double orig = *x;
    *x = orig + h;
    const double fp = f();
    *x = orig - h;
    const double fm = f();
    *x = orig;
    return (fp - fm) / (2.0 * h);
}

inline double rel_err(double got, double want, double floor = 1e-8) {
    return std::abs(got - want) / std::max({std::abs(got), std::abs(want), floor});
}

}  // namespace oracle
