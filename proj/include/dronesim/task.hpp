#pragma once

#include <string>
#include <vector>

#include "dronesim/control.hpp"
#include "dronesim/payload.hpp"
#include "dronesim/randomization.hpp"

namespace dronesim {

enum class TaskKind { Hover, Track, FlyThrough, PayloadHover, InvPendulumHover, Formation };

const char* task_kind_name(TaskKind k);
const char* control_mode_name(ControlMode m);

// Figure-eight (Gerono lemniscate) reference with a gentle vertical component.
struct TrackTrajectory {
    Vec3 center{0.0, 0.0, 1.5};
    double scale = 1.5;   // [m]
    double period = 8.0;  // [s]
    double z_amp = 0.3;   // [m]

    Vec3 position(double t) const;
    // Conservative bound on |d position/dt|; consecutive reference points are
    // never farther apart than speed_bound() · Δt.
    double speed_bound() const;
};

// Wall in the plane x = pos.x with a rectangular opening centered at pos.
struct GateGeometry {
    Vec3 pos{0.0, 0.0, 1.5};
    double half_width = 0.5;   // opening half extent along y [m]
    double half_height = 0.4;  // opening half extent along z [m]

    // Classifies the segment from `a` to `b`: 0 = no plane crossing,
    // 1 = passed through the opening, 2 = hit the wall.
    int classify_segment(const Vec3& a, const Vec3& b) const;
};

struct TaskSpec {
    TaskKind kind = TaskKind::Hover;
    int num_drones = 1;
    int episode_len = 500;
    ControlMode control_mode = ControlMode::Rotor;
    std::string model_name = "hummingbird";

    Vec3 target{0.0, 0.0, 1.5};
    Vec3 start{0.0, 0.0, 1.5};  // nominal reset position (per-drone offset added in Formation)

    // initial-state distribution
    double init_pos_box = 0.5;    // uniform cube edge [m]
    double init_tilt_max = 0.2;   // [rad]
    double init_vel_sigma = 0.1;  // [m/s] and [rad/s]

    // track
    double track_scale = 1.5;
    double track_period = 8.0;
    double track_z_amp = 0.3;
    int track_lookahead = 4;          // reference points in the observation
    double track_lookahead_dt = 0.2;  // spacing between them [s]

    // flythrough
    GateGeometry gate;
    Vec3 flythrough_goal{1.5, 0.0, 1.5};

    // formation
    std::vector<Vec3> formation_offsets;  // zero-centroid template
    double d_safe = 0.3;

    // payload / pendulum
    LinkConfig link{0.6, -1.0, LinkDirection::Below};  // payload_mass < 0 => 0.15 · drone mass

    // termination
    double z_crash = 0.1;
    double tilt_limit_deg = 85.0;
    double link_tilt_limit_deg = 60.0;
    double workspace_radius = 4.0;

    // reward weights
    double lambda_up = 0.5;
    double lambda_spin = 0.2;
    double lambda_action = 0.05;
    double gate_bonus = 10.0;
    double collision_penalty = 10.0;
    double formation_collision_penalty = 5.0;

    // transformed action-space command ranges
    double vel_cmd_max = 2.0;       // [m/s]
    double rate_cmd_max = 4.0;      // [rad/s]
    double att_cmd_max_deg = 45.0;  // roll/pitch [deg]

    TrackTrajectory trajectory() const {
        return {target, track_scale, track_period, track_z_amp};
    }
    bool is_payload_task() const {
        return kind == TaskKind::PayloadHover || kind == TaskKind::InvPendulumHover;
    }
    // Validates cross-field constraints; throws std::invalid_argument.
    void validate() const;
};

// Regular polygon template (zero centroid) used when no offsets are given.
std::vector<Vec3> default_formation_offsets(int num_drones, double radius = 0.8);

}  // namespace dronesim
