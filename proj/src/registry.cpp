#include "dronesim/registry.hpp"

#include <cmath>
#include <stdexcept>

namespace dronesim {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kG = 9.81;

RotorParams make_rotor(Vec3 pos, double spin, double max_thrust, double k = 0.016,
                       double tau = 0.05) {
    RotorParams r;
    r.position_body = pos;
    r.spin_sign = spin;
    r.max_thrust = max_thrust;
    r.force_to_moment = k;
    r.motor_tau = tau;
    return r;
}

// max_thrust sized so hover sits at throttle 0.5.
double per_rotor_thrust(double mass, int n) { return 2.0 * mass * kG / n; }

// Outputs of tools/tune_gains (bisection on each loop's gain until the step
// response overshoots < 10%). The rate gain scales with the inertia; the
// outer loops landed on the same numbers for every fixed-rotor airframe.
PdGains gains_for(const DroneModel& m, double vel_kp) {
    PdGains g;
    g.rate_kp = {m.inertia_diag.x * 7.9, m.inertia_diag.y * 7.9, m.inertia_diag.z * 2.4};
    g.attitude_kp = {5.6, 5.6, 2.3};
    g.vel_kp = {vel_kp, vel_kp, vel_kp};
    g.vel_kd = {0.25, 0.25, 0.25};
    return g;
}

ModelEntry make_crazyflie() {
    DroneModel m;
    m.name = "crazyflie";
    m.mass = 0.028;
    m.inertia_diag = {1.4e-5, 1.4e-5, 2.17e-5};
    m.drag_coeff = 0.01;
    const double a = 0.046 / std::sqrt(2.0);
    const double f = per_rotor_thrust(m.mass, 4);
    m.rotors = {
        make_rotor({a, -a, 0.0}, +1.0, f),   // front-right
        make_rotor({-a, a, 0.0}, +1.0, f),   // back-left
        make_rotor({a, a, 0.0}, -1.0, f),    // front-left
        make_rotor({-a, -a, 0.0}, -1.0, f),  // back-right
    };
    return {m, gains_for(m, 2.1)};
}

ModelEntry make_hummingbird() {
    DroneModel m;
    m.name = "hummingbird";
    m.mass = 0.68;
    m.inertia_diag = {0.007, 0.007, 0.012};
    m.drag_coeff = 0.1;
    const double L = 0.17;
    const double f = per_rotor_thrust(m.mass, 4);
    m.rotors = {
        make_rotor({L, 0.0, 0.0}, +1.0, f),
        make_rotor({0.0, L, 0.0}, -1.0, f),
        make_rotor({-L, 0.0, 0.0}, +1.0, f),
        make_rotor({0.0, -L, 0.0}, -1.0, f),
    };
    return {m, gains_for(m, 1.8)};
}

ModelEntry make_firefly() {
    DroneModel m;
    m.name = "firefly";
    m.mass = 1.5;
    m.inertia_diag = {0.0347, 0.0458, 0.0977};
    m.drag_coeff = 0.15;
    const double L = 0.215;
    const double f = per_rotor_thrust(m.mass, 6);
    for (int i = 0; i < 6; ++i) {
        const double th = kPi / 6.0 + i * kPi / 3.0;
        m.rotors.push_back(
            make_rotor({L * std::cos(th), L * std::sin(th), 0.0}, i % 2 == 0 ? +1.0 : -1.0, f));
    }
    return {m, gains_for(m, 1.7)};
}

ModelEntry make_omav() {
    DroneModel m;
    m.name = "omav";
    m.mass = 4.0;
    m.inertia_diag = {0.078, 0.081, 0.153};
    m.drag_coeff = 0.3;
    m.num_tilt_groups = 6;
    m.tilt_tau = 0.15;
    m.tilt_max = kPi / 2.0;
    const double L = 0.3;
    const double f = per_rotor_thrust(m.mass, 12);
    for (int arm = 0; arm < 6; ++arm) {
        const double th = arm * kPi / 3.0;
        const Vec3 pos{L * std::cos(th), L * std::sin(th), 0.0};
        const Vec3 axis{std::cos(th), std::sin(th), 0.0};
        for (int j = 0; j < 2; ++j) {
            RotorParams r = make_rotor(pos, j == 0 ? +1.0 : -1.0, f);
            r.tilt_group = arm;
            r.tilt_axis = axis;
            m.rotors.push_back(r);
        }
    }
    return {m, gains_for(m, 1.7)};
}

}  // namespace

const std::vector<ModelEntry>& builtin_models() {
    static const std::vector<ModelEntry> models = {make_crazyflie(), make_hummingbird(),
                                                   make_firefly(), make_omav()};
    return models;
}

const ModelEntry& find_builtin(const std::string& name) {
    for (const auto& e : builtin_models()) {
        if (e.model.name == name) return e;
    }
    throw std::invalid_argument("unknown drone model: " + name);
}

bool has_builtin(const std::string& name) {
    for (const auto& e : builtin_models()) {
        if (e.model.name == name) return true;
    }
    return false;
}

}  // namespace dronesim
