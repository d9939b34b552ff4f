#pragma once

#include <string>
#include <vector>

#include "wafersim/config.hpp"
#include "wafersim/simulator.hpp"

namespace wafersim {

struct RunOutcome {
  std::optional<RunRecord> record;
  std::string error;  // set when the config was rejected or the run threw
};

/// Runs configs on up to `threads` workers (0 = hardware concurrency);
/// outcome i always belongs to configs[i].
std::vector<RunOutcome> run_many(const std::vector<SimConfig>& configs, unsigned threads = 0);

/// One named parameter: dotted JSON path into SimConfig and its values.
struct SweepAxis {
  std::string path;
  std::vector<Json> values;
};

struct SweepPoint {
  Json params;  // path -> value for this tuple
  std::string label;
  RunOutcome outcome;
};

/// Cartesian product of the axes, first axis slowest. No axes gives one run of `base`.
std::vector<SweepPoint> sweep(const SimConfig& base, const std::vector<SweepAxis>& axes, unsigned threads = 0);

}  // namespace wafersim
