// Step-response gain search for the built-in airframes. For each loop level
// (rate, attitude, velocity) it bisects a scale on the default gains to the
// largest value whose closed-loop step response overshoots by < 10%, and
// prints the result. The outputs are baked into the registry defaults.

#include <cmath>
#include <cstdio>
#include <functional>

#include "dronesim/control.hpp"
#include "dronesim/registry.hpp"

using namespace dronesim;

namespace {

constexpr double kG = 9.81;

struct StepResult {
    double overshoot = 0.0;   // fraction of the step size
    double final_err = 1.0;   // fraction of the step size at the end
};

StepResult simulate(const DroneModel& model, const PdGains& gains, const AllocationMatrix& alloc,
                    int level) {
    SimParams sim;
    BodyState s;
    s.pos_world = {0, 0, 2};
    MotorState motors = MotorState::uniform(model.num_rotors(), model.hover_throttle(kG));
    VelCtrlState mem;
    const double horizon = level == 2 ? 4.0 : 2.0;
    const int steps = static_cast<int>(horizon / sim.dt_control);
    const double target = level == 0 ? 1.0 : (level == 1 ? 0.3 : 1.0);
    double peak = 0.0, value = 0.0;
    for (int k = 0; k < steps; ++k) {
        MotorState cmd;
        if (level == 0) {
            cmd = rate_control(s, {target, 0, 0}, model.mass * kG, gains, alloc);
        } else if (level == 1) {
            cmd = attitude_control(s, quat_from_axis_angle({1, 0, 0}, target), model.mass * kG,
                                   gains, alloc);
        } else {
            cmd = velocity_control(s, {target, 0, 0}, 0.0, model, sim.gravity, sim.dt_control,
                                   mem, gains, alloc);
        }
        s = step_drone(s, motors, cmd, model, {}, sim);
        if (level == 0) {
            value = s.omega_body.x;
        } else if (level == 1) {
            const Vec3 by = quat_rotate(s.quat, {0, 1, 0});
            value = std::atan2(by.z, by.y);  // roll angle
        } else {
            value = s.vel_world.x;
        }
        peak = std::max(peak, value);
    }
    return {std::max(0.0, (peak - target) / target), std::abs(value - target) / target};
}

double bisect_scale(const std::function<StepResult(double)>& probe) {
    double lo = 0.05, hi = 8.0;
    // push hi down until it behaves
    while (hi > lo) {
        const StepResult r = probe(hi);
        if (r.overshoot < 0.10 && r.final_err < 0.15) break;
        hi *= 0.7;
    }
    for (int it = 0; it < 24; ++it) {
        const double mid = 0.5 * (lo + hi);
        const StepResult r = probe(mid * 1.6);
        if (r.overshoot < 0.10 && r.final_err < 0.15) {
            lo = mid;  // can still go higher
        } else {
            hi = mid;
        }
    }
    return lo;
}

}  // namespace

int main() {
    for (const auto& entry : builtin_models()) {
        const DroneModel& m = entry.model;
        if (m.num_tilt_groups > 0) continue;  // rotor mode only, no cascaded gains
        AllocationMatrix alloc = build_allocation(m);
        PdGains g = entry.gains;

        const double s_rate = bisect_scale([&](double s) {
            PdGains gg = g;
            gg.rate_kp = g.rate_kp * s;
            return simulate(m, gg, alloc, 0);
        });
        g.rate_kp = g.rate_kp * s_rate;

        const double s_att = bisect_scale([&](double s) {
            PdGains gg = g;
            gg.attitude_kp = g.attitude_kp * s;
            return simulate(m, gg, alloc, 1);
        });
        g.attitude_kp = g.attitude_kp * s_att;

        const double s_vel = bisect_scale([&](double s) {
            PdGains gg = g;
            gg.vel_kp = g.vel_kp * s;
            return simulate(m, gg, alloc, 2);
        });
        g.vel_kp = g.vel_kp * s_vel;

        const StepResult rr = simulate(m, g, alloc, 0);
        const StepResult ra = simulate(m, g, alloc, 1);
        const StepResult rv = simulate(m, g, alloc, 2);
        std::printf("%s\n", m.name.c_str());
        std::printf("  rate_kp     = {%.5f, %.5f, %.5f}  (os %.1f%%, err %.1f%%)\n", g.rate_kp.x,
                    g.rate_kp.y, g.rate_kp.z, 100 * rr.overshoot, 100 * rr.final_err);
        std::printf("  attitude_kp = {%.3f, %.3f, %.3f}  (os %.1f%%, err %.1f%%)\n",
                    g.attitude_kp.x, g.attitude_kp.y, g.attitude_kp.z, 100 * ra.overshoot,
                    100 * ra.final_err);
        std::printf("  vel_kp      = {%.3f, %.3f, %.3f}  (os %.1f%%, err %.1f%%)\n", g.vel_kp.x,
                    g.vel_kp.y, g.vel_kp.z, 100 * rv.overshoot, 100 * rv.final_err);
    }
    return 0;
}
