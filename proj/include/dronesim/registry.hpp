#pragma once

#include <string>
#include <vector>

#include "dronesim/airframe.hpp"
#include "dronesim/control.hpp"

namespace dronesim {

struct ModelEntry {
    DroneModel model;
    PdGains gains;
};

// Built-in airframes: crazyflie (X quad), hummingbird (+ quad), firefly
// (hexa), omav (12 rotors on 6 tiltable arms). Parameters are configuration
// defaults adapted from the usual research models; every field can be
// overridden from a config file.
const std::vector<ModelEntry>& builtin_models();

// Throws std::invalid_argument for unknown names.
const ModelEntry& find_builtin(const std::string& name);

bool has_builtin(const std::string& name);

}  // namespace dronesim
