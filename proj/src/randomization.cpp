#include "dronesim/randomization.hpp"

#include <cmath>

namespace dronesim {

void sample_startup(const RandomizationSpec& spec, Rng& rng, const DroneModel& base,
                    DroneModel& out) {
    if (&out != &base) {
        out.name = base.name;
        out.mass = base.mass;
        out.inertia_diag = base.inertia_diag;
        if (out.rotors.size() != base.rotors.size()) out.rotors.resize(base.rotors.size());
        for (std::size_t i = 0; i < base.rotors.size(); ++i) out.rotors[i] = base.rotors[i];
        out.drag_coeff = base.drag_coeff;
        out.num_tilt_groups = base.num_tilt_groups;
        out.tilt_tau = base.tilt_tau;
        out.tilt_max = base.tilt_max;
    }
    if (!spec.enabled) return;
    out.mass = base.mass * spec.mass.sample(rng);
    out.inertia_diag.x = base.inertia_diag.x * spec.inertia.sample(rng);
    out.inertia_diag.y = base.inertia_diag.y * spec.inertia.sample(rng);
    out.inertia_diag.z = base.inertia_diag.z * spec.inertia.sample(rng);
    for (std::size_t i = 0; i < base.rotors.size(); ++i) {
        out.rotors[i].max_thrust = base.rotors[i].max_thrust * spec.max_thrust.sample(rng);
        out.rotors[i].motor_tau = base.rotors[i].motor_tau * spec.motor_tau.sample(rng);
    }
    out.drag_coeff = base.drag_coeff * spec.drag.sample(rng);
}

DroneModel sample_startup(const RandomizationSpec& spec, Rng& rng, const DroneModel& base) {
    DroneModel out = base;
    sample_startup(spec, rng, base, out);
    return out;
}

LinkConfig sample_link(const RandomizationSpec& spec, Rng& rng, const LinkConfig& base) {
    LinkConfig out = base;
    if (!spec.enabled) return out;
    out.payload_mass = base.payload_mass * spec.payload_mass.sample(rng);
    out.length = base.length * spec.payload_length.sample(rng);
    return out;
}

Vec3 wind_step(const Vec3& wind, const WindParams& p, Rng& rng, double dt) {
    if (!p.enabled) return wind;
    const double sdt = p.sigma * std::sqrt(dt);
    Vec3 w = wind;
    w.x += p.theta * (0.0 - w.x) * dt + sdt * rng.normal();
    w.y += p.theta * (0.0 - w.y) * dt + sdt * rng.normal();
    w.z += p.theta * (0.0 - w.z) * dt + sdt * rng.normal();
    if (p.max_force > 0.0) {
        const double n = w.norm();
        if (n > p.max_force) w *= p.max_force / n;
    }
    return w;
}

}  // namespace dronesim
