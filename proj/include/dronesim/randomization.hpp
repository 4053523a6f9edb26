#pragma once

#include "dronesim/airframe.hpp"
#include "dronesim/payload.hpp"
#include "dronesim/rng.hpp"

namespace dronesim {

// Uniform multiplicative scale range.
struct ScaleRange {
    double lo = 1.0, hi = 1.0;

    bool identity() const { return lo == 1.0 && hi == 1.0; }
    bool well_ordered() const { return lo <= hi && lo > 0.0; }
    double sample(Rng& rng) const { return identity() ? 1.0 : rng.uniform(lo, hi); }
};

// Ornstein–Uhlenbeck wind force parameters.
struct WindParams {
    bool enabled = false;
    double theta = 0.5;      // mean reversion [1/s]
    double sigma = 0.0;      // volatility [N/√s]
    double max_force = 0.0;  // magnitude clamp [N]; <= 0 disables the clamp
};

struct RandomizationSpec {
    bool enabled = false;
    ScaleRange mass;
    ScaleRange inertia;     // sampled independently per axis
    ScaleRange max_thrust;  // per rotor ("force constant")
    ScaleRange motor_tau;   // per rotor ("motor gain")
    ScaleRange drag;
    ScaleRange payload_mass;
    ScaleRange payload_length;
    WindParams wind;

    bool well_ordered() const {
        return mass.well_ordered() && inertia.well_ordered() && max_thrust.well_ordered() &&
               motor_tau.well_ordered() && drag.well_ordered() && payload_mass.well_ordered() &&
               payload_length.well_ordered();
    }
};

// Per-environment wind force, world frame.
struct WindState {
    Vec3 force_world;
};

// Independent uniform scale per parameter; the draw order is fixed (mass,
// inertia x/y/z, then per rotor max_thrust and motor_tau, then drag) so a
// fixed rng stream reproduces the same model. Writes into `out` without
// reallocating its rotor table.
void sample_startup(const RandomizationSpec& spec, Rng& rng, const DroneModel& base,
                    DroneModel& out);
DroneModel sample_startup(const RandomizationSpec& spec, Rng& rng, const DroneModel& base);

LinkConfig sample_link(const RandomizationSpec& spec, Rng& rng, const LinkConfig& base);

// One OU step per axis: w ← w + θ(0 − w)dt + σ√dt·ξ, then magnitude clamp.
Vec3 wind_step(const Vec3& wind, const WindParams& p, Rng& rng, double dt);

}  // namespace dronesim
