#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dronesim/math.hpp"
#include "dronesim/rng.hpp"
#include "oracles.hpp"

using namespace dronesim;

namespace {

Quat random_unit_quat(Rng& rng) {
    Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    return q.normalized();
}

Vec3 random_vec(Rng& rng, double scale = 1.0) {
    return {scale * rng.normal(), scale * rng.normal(), scale * rng.normal()};
}

}  // namespace

TEST_CASE("quat_mul: identity and unit basis") {
    Rng rng(7);
    const Quat q = random_unit_quat(rng);
    const Quat r = quat_mul(Quat::identity(), q);
    CHECK(r.w == q.w);
    CHECK(r.x == q.x);
    CHECK(r.y == q.y);
    CHECK(r.z == q.z);

    const Quat i{0, 1, 0, 0};
    const Quat ii = quat_mul(i, i);
    CHECK(ii.w == doctest::Approx(-1.0));
    CHECK(ii.x == 0.0);
    CHECK(ii.y == 0.0);
    CHECK(ii.z == 0.0);
}

TEST_CASE("quat_mul: matches 4x4 matrix-form oracle, norm preserved") {
    Rng rng(11);
    for (int k = 0; k < 200; ++k) {
        const Quat a = random_unit_quat(rng);
        const Quat b = random_unit_quat(rng);
        const Quat got = quat_mul(a, b);
        const Quat want = oracle::quat_mul_matrix_form(a, b);
        CHECK(std::abs(got.w - want.w) < 1e-14);
        CHECK(std::abs(got.x - want.x) < 1e-14);
        CHECK(std::abs(got.y - want.y) < 1e-14);
        CHECK(std::abs(got.z - want.z) < 1e-14);
        CHECK(std::abs(got.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("quat_rotate: axis cases and rotation-matrix oracle") {
    const Vec3 v = quat_rotate(Quat::identity(), {1, 2, 3});
    CHECK(v.x == 1.0);
    CHECK(v.y == 2.0);
    CHECK(v.z == 3.0);

    const Quat qz = quat_from_axis_angle({0, 0, 1}, M_PI / 2);
    const Vec3 r = quat_rotate(qz, {1, 0, 0});
    CHECK(std::abs(r.x - 0.0) < 1e-15);
    CHECK(std::abs(r.y - 1.0) < 1e-15);
    CHECK(std::abs(r.z) < 1e-15);

    Rng rng(13);
    for (int k = 0; k < 200; ++k) {
        const Quat q = random_unit_quat(rng);
        const Vec3 x = random_vec(rng, 2.0);
        const Vec3 got = quat_rotate(q, x);
        const Vec3 want = oracle::rotation_matrix(q).mul(x);
        CHECK((got - want).norm() < 1e-12);
        CHECK(std::abs(got.norm() - x.norm()) < 1e-12);
    }
}

TEST_CASE("quat_rotate: isometry (dot products preserved)") {
    Rng rng(17);
    for (int k = 0; k < 100; ++k) {
        const Quat q = random_unit_quat(rng);
        const Vec3 a = random_vec(rng), b = random_vec(rng);
        CHECK(std::abs(dot(quat_rotate(q, a), quat_rotate(q, b)) - dot(a, b)) < 1e-10);
    }
}

TEST_CASE("quat_integrate: zero rate exact, axis-angle oracle, unit norm") {
    Rng rng(19);
    const Quat q = random_unit_quat(rng);
    const Quat same = quat_integrate(q, {0, 0, 0}, 0.123);
    CHECK(same.w == q.w);
    CHECK(same.x == q.x);

    // π about z over 1 s in 1e-3 steps
    Quat qi = Quat::identity();
    const Vec3 w{0, 0, M_PI};
    for (int k = 0; k < 1000; ++k) qi = quat_integrate(qi, w, 1e-3);
    const Quat want = oracle::axis_angle_quat({0, 0, 1}, M_PI);
    CHECK(oracle::quat_angle_between(qi, want) < 1e-6);

    for (int k = 0; k < 100; ++k) {
        const Quat qq = quat_integrate(random_unit_quat(rng), random_vec(rng, 5.0),
                                       rng.uniform(0.0, 0.1));
        CHECK(std::abs(qq.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("quat_integrate: reversibility of omega then -omega") {
    Rng rng(23);
    for (int k = 0; k < 50; ++k) {
        const Quat q0 = random_unit_quat(rng);
        const Vec3 w = random_vec(rng, 3.0);
        Quat q = q0;
        const int n = 100;
        for (int i = 0; i < n; ++i) q = quat_integrate(q, w, 1e-3);
        for (int i = 0; i < n; ++i) q = quat_integrate(q, -w, 1e-3);
        CHECK(oracle::quat_angle_between(q, q0) < 1e-8);
    }
}

TEST_CASE("quaternion norm stays within 1e-9 over long op sequences") {
    Rng rng(29);
    Quat q = Quat::identity();
    for (int k = 0; k < 20000; ++k) {
        q = quat_integrate(q, random_vec(rng, 4.0), 4e-3);
    }
    CHECK(std::abs(q.norm() - 1.0) < 1e-9);
}

TEST_CASE("integrate_rigid_body: drift at constant velocity") {
    BodyState s;
    s.vel_world = {1, 0, 0};
    const BodyState out = integrate_rigid_body(s, {0, 0, 0}, {0, 0, 0}, 0.5);
    CHECK(out.pos_world.x == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out.pos_world.y == 0.0);
}

TEST_CASE("integrate_rigid_body: free fall vs analytic") {
    BodyState s;
    const Vec3 g{0, 0, -9.81};
    const double dt = 1e-3;
    for (int k = 0; k < 1000; ++k) s = integrate_rigid_body(s, g, {0, 0, 0}, dt);
    CHECK(std::abs(s.vel_world.z - (-9.81)) < 1e-9);
    CHECK(std::abs(s.pos_world.z - (-4.905)) < 5e-3);
}

TEST_CASE("integrate_rigid_body: position error halves with dt (first order)") {
    const Vec3 g{0, 0, -9.81};
    auto fall_error = [&](double dt) {
        BodyState s;
        const int n = static_cast<int>(std::llround(1.0 / dt));
        for (int k = 0; k < n; ++k) s = integrate_rigid_body(s, g, {0, 0, 0}, dt);
        return std::abs(s.pos_world.z - (-4.905));
    };
    const double e1 = fall_error(2e-3);
    const double e2 = fall_error(1e-3);
    const double ratio = e1 / e2;
    CHECK(ratio > 1.8);
    CHECK(ratio < 2.2);
}
