#pragma once

#include "dronesim/airframe.hpp"

namespace dronesim {

enum class LinkDirection { Below, Above };

struct LinkConfig {
    double length = 0.6;        // [m], > 0
    double payload_mass = 0.0;  // [kg], >= 0; 0 decouples the payload exactly
    LinkDirection direction = LinkDirection::Below;
};

// Drone plus point-mass payload on a rigid massless link attached at the
// drone's center of mass, in generalized coordinates: the link direction is a
// unit vector so the length constraint holds by construction.
struct PendulumState {
    BodyState drone;
    Vec3 link_dir{0.0, 0.0, -1.0};  // world frame, attachment -> payload, unit
    Vec3 link_omega;                // world frame, perpendicular to link_dir
};

inline Vec3 payload_position(const PendulumState& s, const LinkConfig& cfg) {
    return s.drone.pos_world + s.link_dir * cfg.length;
}
inline Vec3 payload_velocity(const PendulumState& s, const LinkConfig& cfg) {
    return s.drone.vel_world + cross(s.link_omega, s.link_dir) * cfg.length;
}

// One control step of the coupled system (same sub-step contract as
// step_drone). The link tension exchanges momentum between the bodies; the
// link applies no torque on the drone body.
PendulumState step_coupled(const PendulumState& state, MotorState& motors,
                           const MotorState& motor_target, const DroneModel& model,
                           const LinkConfig& cfg, const Vec3& external_force_world,
                           const SimParams& params);

}  // namespace dronesim
