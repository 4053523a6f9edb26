#include "dronesim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dronesim {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
}

double parse_num(const std::string& key, const std::string& tok) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + tok + "'");
    }
}

}  // namespace

void Config::add_line(const std::string& raw_line, int lineno) {
    std::string line = raw_line;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
        throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    entries_.emplace_back(key, value);
}

Config Config::parse_text(const std::string& text) {
    Config c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) c.add_line(line, ++lineno);
    return c;
}

Config Config::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str());
}

void Config::apply_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "': expected key=value");
    std::string value = kv.substr(eq + 1);
    std::replace(value.begin(), value.end(), ',', ' ');
    entries_.emplace_back(trim(kv.substr(0, eq)), trim(value));
}

bool Config::has(const std::string& key) const { return raw(key).has_value(); }

std::optional<std::string> Config::raw(const std::string& key) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->first == key) return it->second;
    }
    return std::nullopt;
}

std::vector<std::string> Config::repeated(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) {
        if (k == key) out.push_back(v);
    }
    return out;
}

std::string Config::get_str(const std::string& key, const std::string& def) const {
    return raw(key).value_or(def);
}

double Config::get_num(const std::string& key, double def) const {
    const auto v = raw(key);
    if (!v) return def;
    return parse_num(key, trim(*v));
}

int Config::get_int(const std::string& key, int def) const {
    const double v = get_num(key, static_cast<double>(def));
    const int i = static_cast<int>(std::llround(v));
    if (static_cast<double>(i) != v)
        throw ConfigError("config key '" + key + "': expected an integer");
    return i;
}

bool Config::get_bool(const std::string& key, bool def) const {
    const auto v = raw(key);
    if (!v) return def;
    std::string s = trim(*v);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + *v + "'");
}

Vec3 Config::get_vec3(const std::string& key, const Vec3& def) const {
    const auto v = raw(key);
    if (!v) return def;
    const auto t = tokens(*v);
    if (t.size() != 3) throw ConfigError("config key '" + key + "': expected 3 numbers");
    return {parse_num(key, t[0]), parse_num(key, t[1]), parse_num(key, t[2])};
}

std::vector<double> Config::get_nums(const std::string& key) const {
    const auto v = raw(key);
    if (!v) return {};
    std::vector<double> out;
    for (const auto& t : tokens(*v)) out.push_back(parse_num(key, t));
    return out;
}

std::string Config::render() const {
    std::ostringstream os;
    for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
    return os.str();
}

namespace {

TaskKind parse_task_kind(const std::string& s) {
    for (TaskKind k : {TaskKind::Hover, TaskKind::Track, TaskKind::FlyThrough,
                       TaskKind::PayloadHover, TaskKind::InvPendulumHover, TaskKind::Formation}) {
        if (s == task_kind_name(k)) return k;
    }
    throw ConfigError("config key 'task': unknown task kind '" + s + "'");
}

ControlMode parse_control_mode(const std::string& s) {
    for (ControlMode m :
         {ControlMode::Rotor, ControlMode::Velocity, ControlMode::Rate, ControlMode::Attitude}) {
        if (s == control_mode_name(m)) return m;
    }
    throw ConfigError("config key 'control_mode': unknown mode '" + s + "'");
}

ScaleRange parse_range(const Config& cfg, const std::string& key, ScaleRange def) {
    const auto nums = cfg.get_nums(key);
    if (nums.empty()) return def;
    if (nums.size() != 2) throw ConfigError("config key '" + key + "': expected 'lo hi'");
    ScaleRange r{nums[0], nums[1]};
    if (!r.well_ordered())
        throw ConfigError("config key '" + key + "': range must satisfy 0 < lo <= hi");
    return r;
}

Vec3 parse_gain_vec(const Config& cfg, const std::string& key, Vec3 def) {
    const Vec3 v = cfg.get_vec3(key, def);
    if (!(v.x > 0.0 && v.y > 0.0 && v.z > 0.0))
        throw ConfigError("config key '" + key + "': gains must be > 0");
    return v;
}

ModelEntry resolve_model(const Config& cfg, const std::string& name) {
    ModelEntry entry;
    const std::string p = "model." + name + ".";
    const bool customized = cfg.has(p + "mass") || !cfg.repeated(p + "rotor").empty();
    if (has_builtin(name)) {
        entry = find_builtin(name);
    } else if (!customized) {
        throw ConfigError("config key 'drone': unknown model '" + name +
                          "' (not built-in, no model." + name + ".* section)");
    } else {
        entry.model.name = name;
    }
    DroneModel& m = entry.model;
    m.mass = cfg.get_num(p + "mass", m.mass);
    m.inertia_diag = cfg.get_vec3(p + "inertia", m.inertia_diag);
    m.drag_coeff = cfg.get_num(p + "drag", m.drag_coeff);
    m.tilt_tau = cfg.get_num(p + "tilt_tau", m.tilt_tau);
    m.tilt_max = cfg.get_num(p + "tilt_max", m.tilt_max);
    const auto rotor_rows = cfg.repeated(p + "rotor");
    if (!rotor_rows.empty()) {
        // row: px py pz  ax ay az angle  spin  max_thrust  k  tau  [tilt_group tax tay taz]
        m.rotors.clear();
        m.num_tilt_groups = 0;
        for (const auto& row : rotor_rows) {
            std::vector<double> v;
            std::istringstream is(row);
            std::string tok;
            while (is >> tok) v.push_back(parse_num(p + "rotor", tok));
            if (v.size() != 11 && v.size() != 15)
                throw ConfigError("config key '" + p + "rotor': expected 11 or 15 numbers");
            RotorParams r;
            r.position_body = {v[0], v[1], v[2]};
            const Vec3 axis{v[3], v[4], v[5]};
            const double n = axis.norm();
            r.tilt_body = n > 0.0 ? quat_from_axis_angle(axis / n, v[6]) : Quat::identity();
            r.spin_sign = v[7] >= 0.0 ? 1.0 : -1.0;
            r.max_thrust = v[8];
            r.force_to_moment = v[9];
            r.motor_tau = v[10];
            if (v.size() == 15) {
                r.tilt_group = static_cast<int>(v[11]);
                r.tilt_axis = Vec3{v[12], v[13], v[14]}.normalized();
                m.num_tilt_groups = std::max(m.num_tilt_groups, r.tilt_group + 1);
            }
            m.rotors.push_back(r);
        }
    }
    if (!m.valid()) throw ConfigError("model '" + name + "': invalid parameters");

    const std::string gp = "gains." + name + ".";
    entry.gains.rate_kp = parse_gain_vec(cfg, gp + "rate_kp", entry.gains.rate_kp);
    entry.gains.attitude_kp = parse_gain_vec(cfg, gp + "attitude_kp", entry.gains.attitude_kp);
    entry.gains.vel_kp = parse_gain_vec(cfg, gp + "vel_kp", entry.gains.vel_kp);
    entry.gains.vel_kd = parse_gain_vec(cfg, gp + "vel_kd", entry.gains.vel_kd);
    return entry;
}

}  // namespace

Scenario load_scenario(const Config& cfg) {
    Scenario sc;
    TaskSpec& t = sc.task;
    t.kind = parse_task_kind(cfg.get_str("task", "hover"));
    t.model_name = cfg.get_str("drone", "hummingbird");
    t.control_mode = parse_control_mode(cfg.get_str("control_mode", "rotor"));
    t.num_drones = cfg.get_int("num_drones", t.kind == TaskKind::Formation ? 3 : 1);
    t.episode_len = cfg.get_int("episode_len", 500);

    sc.entry = resolve_model(cfg, t.model_name);

    t.target = cfg.get_vec3("target", t.target);
    if (t.kind == TaskKind::FlyThrough) {
        t.gate.pos = cfg.get_vec3("gate.pos", Vec3{0.0, 0.0, 1.5});
        t.gate.half_width = cfg.get_num("gate.half_width", t.gate.half_width);
        t.gate.half_height = cfg.get_num("gate.half_height", t.gate.half_height);
        t.flythrough_goal = cfg.get_vec3("flythrough.goal",
                                         t.gate.pos + Vec3{1.5, 0.0, 0.0});
        t.target = cfg.get_vec3("target", t.gate.pos);  // workspace center
        t.start = cfg.get_vec3("start", t.gate.pos - Vec3{1.5, 0.0, 0.0});
    } else {
        t.start = cfg.get_vec3("start", t.target);
    }

    t.init_pos_box = cfg.get_num("init.pos_box", t.init_pos_box);
    t.init_tilt_max = cfg.get_num("init.tilt_max", t.init_tilt_max);
    t.init_vel_sigma = cfg.get_num("init.vel_sigma", t.init_vel_sigma);

    t.track_scale = cfg.get_num("track.scale", t.track_scale);
    t.track_period = cfg.get_num("track.period", t.track_period);
    t.track_z_amp = cfg.get_num("track.z_amp", t.track_z_amp);

    if (t.kind == TaskKind::Formation) {
        const double radius = cfg.get_num("formation.radius", 0.8);
        t.formation_offsets = default_formation_offsets(t.num_drones, radius);
        const auto rows = cfg.repeated("formation.offset");
        if (!rows.empty()) {
            t.formation_offsets.clear();
            for (const auto& row : rows) {
                std::istringstream is(row);
                double x, y, z;
                if (!(is >> x >> y >> z))
                    throw ConfigError("config key 'formation.offset': expected 3 numbers");
                t.formation_offsets.push_back({x, y, z});
            }
        }
        t.d_safe = cfg.get_num("formation.d_safe", t.d_safe);
    }

    if (t.is_payload_task()) {
        t.link.length = cfg.get_num("payload.length", t.link.length);
        t.link.payload_mass = cfg.get_num("payload.mass", 0.15 * sc.entry.model.mass);
        t.link.direction =
            t.kind == TaskKind::InvPendulumHover ? LinkDirection::Above : LinkDirection::Below;
        if (!(t.link.payload_mass >= 0.0))
            throw ConfigError("config key 'payload.mass': must be >= 0");
    }

    t.z_crash = cfg.get_num("term.z_crash", t.z_crash);
    t.tilt_limit_deg = cfg.get_num("term.tilt_deg", t.tilt_limit_deg);
    t.link_tilt_limit_deg = cfg.get_num("term.link_tilt_deg", t.link_tilt_limit_deg);
    t.workspace_radius = cfg.get_num("term.workspace_radius", t.workspace_radius);

    t.lambda_up = cfg.get_num("reward.lambda_up", t.lambda_up);
    t.lambda_spin = cfg.get_num("reward.lambda_spin", t.lambda_spin);
    t.lambda_action = cfg.get_num("reward.lambda_action", t.lambda_action);

    t.vel_cmd_max = cfg.get_num("act.vel_max", t.vel_cmd_max);
    t.rate_cmd_max = cfg.get_num("act.rate_max", t.rate_cmd_max);
    t.att_cmd_max_deg = cfg.get_num("act.att_max_deg", t.att_cmd_max_deg);
    t.validate();

    sc.sim.dt_control = cfg.get_num("sim.dt_control", sc.sim.dt_control);
    sc.sim.substeps = cfg.get_int("sim.substeps", sc.sim.substeps);
    sc.sim.gravity = cfg.get_vec3("sim.gravity", sc.sim.gravity);
    if (!(sc.sim.dt_control > 0.0)) throw ConfigError("config key 'sim.dt_control': must be > 0");
    if (sc.sim.substeps < 1) throw ConfigError("config key 'sim.substeps': must be >= 1");

    RandomizationSpec& r = sc.rand;
    r.enabled = cfg.get_bool("rand.enabled", false);
    r.mass = parse_range(cfg, "rand.mass", r.mass);
    r.inertia = parse_range(cfg, "rand.inertia", r.inertia);
    r.max_thrust = parse_range(cfg, "rand.max_thrust", r.max_thrust);
    r.motor_tau = parse_range(cfg, "rand.motor_tau", r.motor_tau);
    r.drag = parse_range(cfg, "rand.drag", r.drag);
    r.payload_mass = parse_range(cfg, "rand.payload_mass", r.payload_mass);
    r.payload_length = parse_range(cfg, "rand.payload_length", r.payload_length);
    r.wind.enabled = cfg.get_bool("rand.wind.enabled", false);
    r.wind.theta = cfg.get_num("rand.wind.theta", r.wind.theta);
    // default volatility sized so the stationary force std is ~0.1·m·g
    const double default_sigma =
        0.1 * sc.entry.model.mass * 9.81 * std::sqrt(2.0 * r.wind.theta);
    r.wind.sigma = cfg.get_num("rand.wind.sigma", default_sigma);
    r.wind.max_force = cfg.get_num("rand.wind.max", 0.3 * sc.entry.model.mass * 9.81);

    PpoConfig& p = sc.ppo;
    p.gamma = cfg.get_num("ppo.gamma", p.gamma);
    p.gae_lambda = cfg.get_num("ppo.lambda", p.gae_lambda);
    p.clip_eps = cfg.get_num("ppo.clip", p.clip_eps);
    p.epochs = cfg.get_int("ppo.epochs", p.epochs);
    p.minibatches = cfg.get_int("ppo.minibatches", p.minibatches);
    p.learning_rate = cfg.get_num("ppo.lr", p.learning_rate);
    p.value_coef = cfg.get_num("ppo.value_coef", p.value_coef);
    p.entropy_coef = cfg.get_num("ppo.entropy_coef", p.entropy_coef);
    p.rollout_len = cfg.get_int("ppo.rollout", p.rollout_len);
    p.max_grad_norm = cfg.get_num("ppo.max_grad_norm", p.max_grad_norm);
    p.centralized_critic = cfg.get_bool("ppo.centralized_critic", p.centralized_critic);
    p.log_std_init = cfg.get_num("ppo.log_std_init", p.log_std_init);
    if (!p.valid()) throw ConfigError("config: invalid ppo.* settings");

    sc.num_envs = cfg.get_int("num_envs", sc.num_envs);
    if (sc.num_envs < 1) throw ConfigError("config key 'num_envs': must be >= 1");
    sc.seed = static_cast<std::uint64_t>(cfg.get_num("seed", 0.0));
    return sc;
}

}  // namespace dronesim
