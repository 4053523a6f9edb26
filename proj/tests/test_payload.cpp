#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dronesim/payload.hpp"
#include "dronesim/registry.hpp"
#include "dronesim/rng.hpp"
#include "oracles.hpp"

using namespace dronesim;

namespace {
constexpr double kG = 9.81;

DroneModel bare_model(double drag = 0.0) {
    DroneModel m = find_builtin("hummingbird").model;
    m.drag_coeff = drag;
    return m;
}

}  // namespace

TEST_CASE("step_coupled: zero payload mass decouples exactly") {
    const DroneModel m = bare_model(0.1);
    const SimParams sim;
    const LinkConfig cfg{0.6, 0.0, LinkDirection::Below};
    Rng rng(41);

    PendulumState ps;
    ps.drone.pos_world = {0, 0, 2};
    ps.link_omega = {0.4, 0.0, 0.0};
    BodyState bare = ps.drone;
    MotorState mc = MotorState::uniform(4, 0.3);
    MotorState mb = mc;
    for (int k = 0; k < 100; ++k) {
        MotorState tgt;
        tgt.count = 4;
        for (int i = 0; i < 4; ++i) tgt.throttle[i] = rng.uniform(0.3, 0.7);
        ps = step_coupled(ps, mc, tgt, m, cfg, {}, sim);
        bare = step_drone(bare, mb, tgt, m, {}, sim);
    }
    CHECK((ps.drone.pos_world - bare.pos_world).norm() < 1e-10);
    CHECK((ps.drone.vel_world - bare.vel_world).norm() < 1e-10);
    CHECK((ps.drone.omega_body - bare.omega_body).norm() < 1e-10);
}

TEST_CASE("step_coupled: hanging payload equilibrium") {
    const DroneModel m = bare_model(0.0);
    const SimParams sim;
    const LinkConfig cfg{0.6, 0.15 * m.mass, LinkDirection::Below};
    // total thrust = (m_d + m_p) g
    const double throttle = m.hover_throttle(kG) * (m.mass + cfg.payload_mass) / m.mass;
    PendulumState ps;
    ps.drone.pos_world = {0, 0, 2};
    ps.link_dir = {0, 0, -1};
    MotorState motors = MotorState::uniform(4, throttle);
    const MotorState target = MotorState::uniform(4, throttle);
    for (int k = 0; k < 500; ++k) ps = step_coupled(ps, motors, target, m, cfg, {}, sim);
    CHECK((ps.drone.pos_world - Vec3{0, 0, 2}).norm() < 1e-5);
    CHECK((payload_position(ps, cfg) - Vec3{0, 0, 2 - cfg.length}).norm() < 1e-5);
}

TEST_CASE("step_coupled: link length is exact by construction") {
    const DroneModel m = bare_model(0.05);
    const SimParams sim;
    const LinkConfig cfg{0.8, 0.2, LinkDirection::Below};
    Rng rng(43);
    PendulumState ps;
    ps.drone.pos_world = {0, 0, 3};
    ps.link_dir = Vec3{0.3, 0.2, -0.9}.normalized();
    ps.link_omega = {0.5, -0.2, 0.0};
    ps.link_omega -= ps.link_dir * dot(ps.link_omega, ps.link_dir);
    MotorState motors = MotorState::uniform(4, 0.5);
    for (int k = 0; k < 2000; ++k) {
        MotorState tgt;
        tgt.count = 4;
        for (int i = 0; i < 4; ++i) tgt.throttle[i] = rng.uniform(0.2, 0.9);
        ps = step_coupled(ps, motors, tgt, m, cfg, {}, sim);
        CHECK(std::abs(ps.link_dir.norm() - 1.0) < 1e-12);
        CHECK(std::abs((payload_position(ps, cfg) - ps.drone.pos_world).norm() - cfg.length) <
              1e-12);
        CHECK(std::abs(dot(ps.link_omega, ps.link_dir)) < 1e-9);
    }
}

TEST_CASE("step_coupled: inverted pendulum growth rate matches linearization") {
    const DroneModel m = bare_model(0.0);
    SimParams sim;
    const LinkConfig cfg{0.6, 0.15 * m.mass, LinkDirection::Above};
    const double throttle = m.hover_throttle(kG) * (m.mass + cfg.payload_mass) / m.mass;
    PendulumState ps;
    ps.drone.pos_world = {0, 0, 2};
    const double tilt0 = 1e-3;
    ps.link_dir = {std::sin(tilt0), 0.0, std::cos(tilt0)};
    MotorState motors = MotorState::uniform(4, throttle);
    const MotorState target = MotorState::uniform(4, throttle);

    double t_a = -1.0, t_b = -1.0;
    double prev_tilt = tilt0;
    const int steps = static_cast<int>(2.0 / sim.dt_control);
    for (int k = 0; k < steps; ++k) {
        ps = step_coupled(ps, motors, target, m, cfg, {}, sim);
        const double tilt = std::acos(std::min(1.0, ps.link_dir.z));
        CHECK(tilt >= prev_tilt);  // monotone growth of the instability
        prev_tilt = tilt;
        const double t = (k + 1) * sim.dt_control;
        if (t_a < 0.0 && tilt >= 0.01) t_a = t;
        if (t_b < 0.0 && tilt >= 0.1) t_b = t;
        if (t_b > 0.0) break;
    }
    REQUIRE(t_b > 0.0);  // exceeds 0.1 rad within 2 s
    // in the exponential regime θ(t) ≈ ½θ₀ e^{λt}: λ ≈ ln(θ_b/θ_a)/(t_b−t_a)
    const double lambda_measured = std::log(0.1 / 0.01) / (t_b - t_a);
    const double lambda_ref = std::sqrt(kG / cfg.length);
    CHECK(std::abs(lambda_measured - lambda_ref) / lambda_ref < 0.2);
}

namespace {

double system_energy(const PendulumState& s, const DroneModel& m, const LinkConfig& cfg) {
    const Vec3 vp = payload_velocity(s, cfg);
    const Vec3 pp = payload_position(s, cfg);
    const Vec3 Jw = s.drone.omega_body.cwise(m.inertia_diag);
    return 0.5 * m.mass * s.drone.vel_world.squared_norm() +
           0.5 * cfg.payload_mass * vp.squared_norm() + 0.5 * dot(s.drone.omega_body, Jw) +
           kG * (m.mass * s.drone.pos_world.z + cfg.payload_mass * pp.z);
}

}  // namespace

TEST_CASE("step_coupled: two-body energy conserved within 0.1%/s at dt 1e-3") {
    const DroneModel m = bare_model(0.0);
    SimParams sim;
    sim.dt_control = 1e-3;
    sim.substeps = 1;
    const LinkConfig cfg{0.7, 0.3, LinkDirection::Below};
    PendulumState ps;
    ps.drone.pos_world = {0, 0, 12};
    ps.drone.vel_world = {2.0, -1.0, 1.0};
    ps.drone.omega_body = {1.0, 0.5, -0.8};
    ps.link_dir = Vec3{0.5, 0.1, -0.85}.normalized();
    ps.link_omega = {1.0, 2.0, 0.0};
    ps.link_omega -= ps.link_dir * dot(ps.link_omega, ps.link_dir);
    MotorState motors = MotorState::uniform(4, 0.0);
    const MotorState target = MotorState::uniform(4, 0.0);
    const double e0 = system_energy(ps, m, cfg);
    for (int k = 0; k < 1000; ++k) ps = step_coupled(ps, motors, target, m, cfg, {}, sim);
    const double e1 = system_energy(ps, m, cfg);
    CHECK(std::abs(e1 - e0) / std::abs(e0) < 1e-3);
}

TEST_CASE("step_coupled: below/above mirror symmetry with negated gravity") {
    const DroneModel m = bare_model(0.1);
    SimParams below_sim;
    SimParams above_sim;
    above_sim.gravity = -below_sim.gravity;
    const LinkConfig below{0.6, 0.2, LinkDirection::Below};
    const LinkConfig above{0.6, 0.2, LinkDirection::Above};

    // zero thrust; attitude stays identity in both runs so the mirror
    // z -> -z maps state for state (angular link rate is an axial vector)
    PendulumState pb;
    pb.drone.pos_world = {0.3, -0.2, 5.0};
    pb.drone.vel_world = {0.5, 0.2, -0.3};
    pb.link_dir = Vec3{0.3, 0.1, -0.9}.normalized();
    pb.link_omega = {0.7, -0.4, 0.1};
    pb.link_omega -= pb.link_dir * dot(pb.link_omega, pb.link_dir);

    auto mirror = [](const Vec3& v) { return Vec3{v.x, v.y, -v.z}; };
    auto mirror_axial = [](const Vec3& v) { return Vec3{-v.x, -v.y, v.z}; };
    PendulumState pa;
    pa.drone.pos_world = mirror(pb.drone.pos_world);
    pa.drone.vel_world = mirror(pb.drone.vel_world);
    pa.link_dir = mirror(pb.link_dir);
    pa.link_omega = mirror_axial(pb.link_omega);

    MotorState mb = MotorState::uniform(4, 0.0), ma = mb;
    const MotorState tgt = MotorState::uniform(4, 0.0);
    for (int k = 0; k < 300; ++k) {
        pb = step_coupled(pb, mb, tgt, m, below, {}, below_sim);
        pa = step_coupled(pa, ma, tgt, m, above, {}, above_sim);
        CHECK((pa.drone.pos_world - mirror(pb.drone.pos_world)).norm() < 1e-9);
        CHECK((pa.drone.vel_world - mirror(pb.drone.vel_world)).norm() < 1e-9);
        CHECK((pa.link_dir - mirror(pb.link_dir)).norm() < 1e-9);
        CHECK((pa.link_omega - mirror_axial(pb.link_omega)).norm() < 1e-9);
    }
}
