#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fblc/sim/sim.hpp"
#include "fblc/system/input_affine_system.hpp"

namespace fblc::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LandscapeSpec {
  std::vector<sim::GridAxis> axes;
  std::map<std::string, double> fixed;
};

struct ScenarioConfig {
  std::string name = "scenario";
  system::SystemText system;
  std::vector<std::string> constraints;
  std::string reference = "0";
  sim::RunConfig run;
  sim::Theorem1Settings verify;
  std::optional<LandscapeSpec> landscape;
  std::string plot = "gnuplot";  // gnuplot | python
};

// YAML text. Unknown keys are rejected.
ScenarioConfig parse_config(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);
std::string emit_config(const ScenarioConfig& cfg);

struct Scenario {
  system::InputAffineSystem system;
  std::vector<symbolic::Expr> constraints;
  symbolic::Expr reference;
};

// Parses every expression against the declared symbols. Failures become
// ConfigError.
Scenario build_scenario(const ScenarioConfig& cfg);

}  // namespace fblc::cli
