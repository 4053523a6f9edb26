#include "dronesim/task.hpp"

#include <cmath>
#include <stdexcept>

namespace dronesim {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* task_kind_name(TaskKind k) {
    switch (k) {
        case TaskKind::Hover: return "hover";
        case TaskKind::Track: return "track";
        case TaskKind::FlyThrough: return "flythrough";
        case TaskKind::PayloadHover: return "payload_hover";
        case TaskKind::InvPendulumHover: return "invpendulum_hover";
        case TaskKind::Formation: return "formation";
    }
    return "?";
}

const char* control_mode_name(ControlMode m) {
    switch (m) {
        case ControlMode::Rotor: return "rotor";
        case ControlMode::Velocity: return "velocity";
        case ControlMode::Rate: return "rate";
        case ControlMode::Attitude: return "attitude";
    }
    return "?";
}

Vec3 TrackTrajectory::position(double t) const {
    const double th = 2.0 * kPi * t / period;
    const double s = std::sin(th);
    return {center.x + scale * s, center.y + scale * s * std::cos(th),
            center.z + z_amp * std::sin(2.0 * th)};
}

double TrackTrajectory::speed_bound() const {
    const double w = 2.0 * kPi / period;
    // |x'| <= scale·w, |y'| <= scale·w (cos 2θ), |z'| <= 2·z_amp·w
    return w * std::sqrt(2.0 * scale * scale + 4.0 * z_amp * z_amp);
}

int GateGeometry::classify_segment(const Vec3& a, const Vec3& b) const {
    const double da = a.x - pos.x;
    const double db = b.x - pos.x;
    if (da == db) return 0;
    if ((da > 0.0) == (db > 0.0)) return 0;  // no crossing (touching counts as crossing only on sign change)
    const double t = da / (da - db);
    const double y = a.y + t * (b.y - a.y);
    const double z = a.z + t * (b.z - a.z);
    const bool inside =
        std::abs(y - pos.y) <= half_width && std::abs(z - pos.z) <= half_height;
    return inside ? 1 : 2;
}

void TaskSpec::validate() const {
    if (episode_len <= 0) throw std::invalid_argument("task: episode_len must be > 0");
    if (kind == TaskKind::Formation) {
        if (num_drones < 2) throw std::invalid_argument("task: formation needs >= 2 drones");
    } else if (num_drones != 1) {
        throw std::invalid_argument("task: single-agent kind requires num_drones = 1");
    }
    if (is_payload_task() && !(link.length > 0.0))
        throw std::invalid_argument("task: link length must be > 0");
    if (!formation_offsets.empty() &&
        formation_offsets.size() != static_cast<std::size_t>(num_drones))
        throw std::invalid_argument("task: formation offsets must match num_drones");
}

std::vector<Vec3> default_formation_offsets(int num_drones, double radius) {
    std::vector<Vec3> offsets;
    offsets.reserve(num_drones);
    for (int i = 0; i < num_drones; ++i) {
        const double th = 2.0 * kPi * i / num_drones;
        offsets.push_back({radius * std::cos(th), radius * std::sin(th), 0.0});
    }
    // zero the centroid exactly
    Vec3 c;
    for (const auto& o : offsets) c += o;
    c = c / static_cast<double>(num_drones);
    for (auto& o : offsets) o -= c;
    return offsets;
}

}  // namespace dronesim
