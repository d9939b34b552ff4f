#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wafersim/config.hpp"

namespace wafersim {

enum class ExperimentKind { SurfaceCompare, AccelStudy, ScanStudy, Case1, Case2, Sweep, Gains, Bound, Containment };

std::string_view to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(std::string_view name);
const std::vector<ExperimentKind>& all_experiment_kinds();

/// Named property checked on an experiment's results.
struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentOutput {
  std::vector<std::pair<std::string, std::string>> files;  // file name -> contents, in write order
  std::string summary;
  std::vector<Check> checks;
  std::vector<std::string> run_failures;

  bool checks_passed() const;
  const Check* find(const std::string& name) const;
};

/// Complete default configuration for a kind.
Json preset(ExperimentKind kind);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::string>> controllers;
};

/**
 * Preset merged with `user` (objects merge recursively, everything else
 * replaces), then overrides. The result is validated and normalized so it
 * names every parameter; feeding it back in yields itself.
 */
Json effective_config(ExperimentKind kind, const Json& user = Json::object(), const Overrides& overrides = {});

ExperimentOutput run_experiment(const Json& effective);

/// Writes every file plus config.json atomically into `dir`.
void write_outputs(const ExperimentOutput& output, const Json& effective, const std::filesystem::path& dir);

}  // namespace wafersim
