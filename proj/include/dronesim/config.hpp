#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dronesim/ppo_config.hpp"
#include "dronesim/registry.hpp"
#include "dronesim/task.hpp"

namespace dronesim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Plain-text key-value configuration: one `key = value...` per line, `#`
// comments. Lookups are last-wins so later lines (and CLI overrides) replace
// earlier ones; `model.<name>.rotor` rows accumulate instead.
class Config {
public:
    Config() = default;

    static Config parse_text(const std::string& text);
    static Config load_file(const std::string& path);  // ConfigError if unreadable

    // "key=v" or "key=v1,v2,..." (commas become spaces), as taken by --override.
    void apply_override(const std::string& kv);

    bool has(const std::string& key) const;
    std::optional<std::string> raw(const std::string& key) const;
    std::vector<std::string> repeated(const std::string& key) const;

    std::string get_str(const std::string& key, const std::string& def) const;
    double get_num(const std::string& key, double def) const;
    int get_int(const std::string& key, int def) const;
    bool get_bool(const std::string& key, bool def) const;
    Vec3 get_vec3(const std::string& key, const Vec3& def) const;
    std::vector<double> get_nums(const std::string& key) const;

    // Canonical text form (used to record the resolved config of a run).
    std::string render() const;

private:
    void add_line(const std::string& line, int lineno);
    std::vector<std::pair<std::string, std::string>> entries_;
};

// Everything needed to build environments and a learner for one run.
struct Scenario {
    TaskSpec task;
    SimParams sim;
    RandomizationSpec rand;
    PpoConfig ppo;
    ModelEntry entry;  // resolved nominal airframe + controller gains
    int num_envs = 1024;
    std::uint64_t seed = 0;
};

// Resolves the scenario, including custom `model.<name>.*` / `gains.<name>.*`
// sections. Throws ConfigError naming the offending key.
Scenario load_scenario(const Config& cfg);

}  // namespace dronesim
