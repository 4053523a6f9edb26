#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dronesim/airframe.hpp"
#include "dronesim/config.hpp"
#include "dronesim/registry.hpp"
#include "dronesim/rng.hpp"
#include "oracles.hpp"

using namespace dronesim;

namespace {
constexpr double kG = 9.81;

// symmetric test quad, X layout, zero drag
DroneModel test_quad(double drag = 0.0) {
    DroneModel m = find_builtin("crazyflie").model;
    m.drag_coeff = drag;
    return m;
}

}  // namespace

TEST_CASE("rotor_wrench: symmetric quad at equal throttles") {
    const DroneModel m = test_quad();
    const MotorState motors = MotorState::uniform(4, 0.37);
    const Wrench w = rotor_wrench(m, motors);
    const double f_one = 0.37 * m.rotors[0].max_thrust;
    CHECK(std::abs(w.torque_body.x) < 1e-12);
    CHECK(std::abs(w.torque_body.y) < 1e-12);
    CHECK(std::abs(w.torque_body.z) < 1e-12);
    CHECK(std::abs(w.force_body.x) < 1e-12);
    CHECK(std::abs(w.force_body.y) < 1e-12);
    CHECK(w.force_body.z == doctest::Approx(4.0 * f_one).epsilon(1e-12));
}

TEST_CASE("rotor_wrench: single front-right rotor, cross-product oracle") {
    const DroneModel m = test_quad();
    // rotor 0 is front-right: +x, -y
    REQUIRE(m.rotors[0].position_body.x > 0);
    REQUIRE(m.rotors[0].position_body.y < 0);
    MotorState motors;
    motors.count = 4;
    motors.throttle[0] = 1.0;
    const Wrench w = rotor_wrench(m, motors);

    // independent cross-product computation from the geometry table
    const double f = m.rotors[0].max_thrust;
    const Vec3 expected_torque =
        cross(m.rotors[0].position_body, Vec3{0, 0, f}) +
        Vec3{0, 0, m.rotors[0].spin_sign * m.rotors[0].force_to_moment * f};
    CHECK(std::abs(w.torque_body.x - expected_torque.x) < 1e-12);
    CHECK(std::abs(w.torque_body.y - expected_torque.y) < 1e-12);
    CHECK(std::abs(w.torque_body.z - expected_torque.z) < 1e-12);
    CHECK(w.torque_body.x < 0.0);  // thrust on the right side rolls negative
    CHECK(w.torque_body.z * m.rotors[0].spin_sign > 0.0);
}

TEST_CASE("rotor_wrench: rotor tilted 90 deg toward +x") {
    DroneModel m = test_quad();
    m.rotors[1].tilt_body = quat_from_axis_angle({0, 1, 0}, M_PI / 2);  // z-axis -> +x
    MotorState motors;
    motors.count = 4;
    motors.throttle[1] = 0.6;
    const Wrench w = rotor_wrench(m, motors);
    CHECK(w.force_body.x == doctest::Approx(0.6 * m.rotors[1].max_thrust).epsilon(1e-12));
    CHECK(std::abs(w.force_body.z) < 1e-12);
}

TEST_CASE("rotor_wrench: linear in throttles") {
    const DroneModel m = find_builtin("firefly").model;
    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
        MotorState t1, t2, mix;
        t1.count = t2.count = mix.count = m.num_rotors();
        const double a = rng.uniform(0.0, 1.0), b = 1.0 - a;
        for (int i = 0; i < m.num_rotors(); ++i) {
            t1.throttle[i] = rng.uniform(0.0, 1.0);
            t2.throttle[i] = rng.uniform(0.0, 1.0);
            mix.throttle[i] = a * t1.throttle[i] + b * t2.throttle[i];
        }
        const Wrench w1 = rotor_wrench(m, t1), w2 = rotor_wrench(m, t2);
        const Wrench wm = rotor_wrench(m, mix);
        CHECK((wm.force_body - (w1.force_body * a + w2.force_body * b)).norm() < 1e-12);
        CHECK((wm.torque_body - (w1.torque_body * a + w2.torque_body * b)).norm() < 1e-12);
    }
}

TEST_CASE("motor_step: fixed point, exponential convergence") {
    const DroneModel m = test_quad();
    MotorState cur = MotorState::uniform(4, 0.4);
    const MotorState tgt = MotorState::uniform(4, 0.4);
    motor_step(cur, tgt, m, 0.01);
    CHECK(cur.throttle[0] == 0.4);

    // from 0 toward 1 over one time constant, 100 substeps
    const double tau = m.rotors[0].motor_tau;
    MotorState rise = MotorState::uniform(4, 0.0);
    const MotorState one = MotorState::uniform(4, 1.0);
    for (int k = 0; k < 100; ++k) motor_step(rise, one, m, tau / 100.0);
    const double want = 1.0 - std::exp(-1.0);
    CHECK(std::abs(rise.throttle[0] - want) / want < 0.02);

    // 10 time constants -> converged to 1e-4
    for (int k = 0; k < 900; ++k) motor_step(rise, one, m, tau / 100.0);
    CHECK(std::abs(rise.throttle[0] - 1.0) < 1e-4);
}

TEST_CASE("motor_step: tau <= 0 is pass-through") {
    DroneModel m = test_quad();
    for (auto& r : m.rotors) r.motor_tau = 0.0;
    MotorState cur = MotorState::uniform(4, 0.1);
    const MotorState tgt = MotorState::uniform(4, 0.9);
    motor_step(cur, tgt, m, 1e-4);
    CHECK(cur.throttle[0] == 0.9);
}

TEST_CASE("step_drone: hover equilibrium holds for 1000 control steps") {
    const DroneModel m = test_quad();
    const SimParams sim;
    const double h = m.hover_throttle(kG);
    BodyState s;
    s.pos_world = {0, 0, 1};
    MotorState motors = MotorState::uniform(4, h);
    const MotorState target = MotorState::uniform(4, h);
    for (int k = 0; k < 1000; ++k) s = step_drone(s, motors, target, m, {}, sim);
    CHECK((s.pos_world - Vec3{0, 0, 1}).norm() < 1e-6);
    CHECK(oracle::quat_angle_between(s.quat, Quat::identity()) < 1e-6);
}

TEST_CASE("step_drone: zero throttle free fall matches analytic") {
    const DroneModel m = test_quad();
    SimParams sim;
    sim.dt_control = 1e-3;
    sim.substeps = 1;
    BodyState s;
    s.pos_world = {0, 0, 10};
    MotorState motors = MotorState::uniform(4, 0.0);
    const MotorState target = MotorState::uniform(4, 0.0);
    for (int k = 0; k < 1000; ++k) s = step_drone(s, motors, target, m, {}, sim);
    CHECK(std::abs(s.pos_world.z - (10.0 - 4.905)) < 5e-3);
    CHECK(std::abs(s.vel_world.z - (-9.81)) < 1e-9);
}

TEST_CASE("step_drone: torque-free principal-axis spin conserves |omega|") {
    const DroneModel m = test_quad();
    SimParams sim;
    sim.dt_control = 1e-3;
    sim.substeps = 1;
    BodyState s;
    s.pos_world = {0, 0, 50};
    s.omega_body = {0, 0, 3.0};
    MotorState motors = MotorState::uniform(4, 0.0);
    const MotorState target = MotorState::uniform(4, 0.0);
    for (int k = 0; k < 1000; ++k) s = step_drone(s, motors, target, m, {}, sim);
    CHECK(std::abs(s.omega_body.norm() - 3.0) < 1e-9);
}

namespace {

double mech_energy(const BodyState& s, const DroneModel& m) {
    const Vec3 Jw = s.omega_body.cwise(m.inertia_diag);
    return 0.5 * m.mass * s.vel_world.squared_norm() + 0.5 * dot(s.omega_body, Jw) +
           m.mass * kG * s.pos_world.z;
}

}  // namespace

TEST_CASE("step_drone: energy drift < 0.1% per second at dt 1e-3") {
    const DroneModel m = test_quad();
    SimParams sim;
    sim.dt_control = 1e-3;
    sim.substeps = 1;
    BodyState s;
    s.pos_world = {0, 0, 10};
    s.vel_world = {2, 1, 3};
    s.omega_body = {2.0, -1.0, 1.5};
    MotorState motors = MotorState::uniform(4, 0.0);
    const MotorState target = MotorState::uniform(4, 0.0);
    const double e0 = mech_energy(s, m);
    for (int k = 0; k < 1000; ++k) s = step_drone(s, motors, target, m, {}, sim);
    const double e1 = mech_energy(s, m);
    CHECK(std::abs(e1 - e0) / std::abs(e0) < 1e-3);
}

TEST_CASE("step_drone: world angular momentum conserved under zero torque") {
    const DroneModel m = test_quad();
    SimParams sim;
    sim.dt_control = 1e-3;
    sim.substeps = 1;
    BodyState s;
    s.pos_world = {0, 0, 100};
    s.omega_body = {1.5, -0.7, 0.9};
    MotorState motors = MotorState::uniform(4, 0.0);
    const MotorState target = MotorState::uniform(4, 0.0);
    auto L_world = [&](const BodyState& b) {
        return quat_rotate(b.quat, b.omega_body.cwise(m.inertia_diag));
    };
    const Vec3 L0 = L_world(s);
    for (int k = 0; k < 1000; ++k) s = step_drone(s, motors, target, m, {}, sim);
    CHECK((L_world(s) - L0).norm() / L0.norm() < 1e-3);
}

TEST_CASE("step_drone: doubling mass exactly halves linear acceleration") {
    DroneModel m1 = test_quad();
    m1.drag_coeff = 0.0;
    DroneModel m2 = m1;
    m2.mass *= 2.0;
    SimParams sim;
    sim.dt_control = 1e-3;
    sim.substeps = 1;
    sim.gravity = {0, 0, 0};
    BodyState a, b;
    MotorState ma = MotorState::uniform(4, 0.8), mb = ma;
    const MotorState tgt = MotorState::uniform(4, 0.8);
    const BodyState ra = step_drone(a, ma, tgt, m1, {}, sim);
    const BodyState rb = step_drone(b, mb, tgt, m2, {}, sim);
    CHECK(std::abs(ra.vel_world.z - 2.0 * rb.vel_world.z) <
          1e-12 * std::abs(ra.vel_world.z));
}

TEST_CASE("model registry: four builtin airframes, valid parameters") {
    for (const char* name : {"crazyflie", "hummingbird", "firefly", "omav"}) {
        const ModelEntry& e = find_builtin(name);
        CHECK(e.model.valid());
        // hover throttle sized to 0.5
        CHECK(e.model.hover_throttle(kG) == doctest::Approx(0.5).epsilon(1e-12));
    }
    CHECK(find_builtin("omav").model.num_tilt_groups == 6);
    CHECK(find_builtin("omav").model.num_rotors() == 12);
    CHECK_THROWS(find_builtin("nonexistent"));
}

TEST_CASE("model config file: rotor table and overrides") {
    const std::string text = R"(
# custom airframe
model.testbird.mass = 0.5
model.testbird.inertia = 0.004 0.004 0.008
model.testbird.drag = 0.05
model.testbird.rotor = 0.1 0 0    0 0 1 0   +1  2.0  0.016 0.05
model.testbird.rotor = 0 0.1 0    0 0 1 0   -1  2.0  0.016 0.05
model.testbird.rotor = -0.1 0 0   0 0 1 0   +1  2.0  0.016 0.05
model.testbird.rotor = 0 -0.1 0   0 0 1 0   -1  2.0  0.016 0.05
gains.testbird.rate_kp = 0.05 0.05 0.02
task = hover
drone = testbird
)";
    const Config cfg = Config::parse_text(text);
    const Scenario sc = load_scenario(cfg);
    CHECK(sc.entry.model.mass == 0.5);
    CHECK(sc.entry.model.num_rotors() == 4);
    CHECK(sc.entry.model.rotors[1].spin_sign == -1.0);
    CHECK(sc.entry.gains.rate_kp.x == 0.05);

    Config bad = Config::parse_text(text);
    bad.apply_override("model.testbird.mass=-1");
    CHECK_THROWS_AS((void)load_scenario(bad), ConfigError);
}

TEST_CASE("omav: tilting an arm redirects thrust") {
    const DroneModel m = find_builtin("omav").model;
    const MotorState motors = MotorState::uniform(12, 0.5);
    TiltState tilt;
    tilt.count = 6;
    const Wrench level = rotor_wrench(m, motors, tilt);
    CHECK(std::abs(level.force_body.x) < 1e-12);
    tilt.angle[0] = M_PI / 2;  // arm 0 sits on +x, tilt axis +x: thrust swings toward -y
    const Wrench tilted = rotor_wrench(m, motors, tilt);
    CHECK(tilted.force_body.z < level.force_body.z);
    CHECK(std::abs(tilted.force_body.y) > 0.1);
}
