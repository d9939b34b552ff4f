#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "wafersim/simulator.hpp"

namespace wafersim {

using Json = nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// JSON <-> SimConfig. Reading starts from the current values of `config`, so
// missing keys keep their defaults; unknown keys throw ConfigError naming the
// full key path. The controller's nominal plant always mirrors plant.K_bar /
// plant.T_v_bar, and its surface family and feedforward flag follow the family.

Json to_json(const SimConfig& config);
Json to_json(const ControllerSpec& spec);
Json to_json(const TrajectorySpec& spec);

void apply_json(const Json& j, SimConfig& config, const std::string& path = "");
void apply_json(const Json& j, ControllerSpec& spec, const std::string& path = "controller");
void apply_json(const Json& j, TrajectorySpec& spec, const std::string& path = "trajectory");

SimConfig sim_config_from_json(const Json& j);

/// Default controller for a family (surface family, feedforward, phi form consistent).
ControllerSpec default_controller(ControllerFamily family);

/// Canonical dump hashed with 64-bit FNV-1a, as 16 hex digits.
std::string config_hash(const SimConfig& config);
std::string fnv1a_hex(const std::string& bytes);

/// Sets the value at a dotted path ("trajectory.max_accel"), creating objects as needed.
void set_json_path(Json& j, const std::string& dotted, const Json& value);

}  // namespace wafersim
