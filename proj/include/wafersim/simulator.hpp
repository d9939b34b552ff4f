#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "wafersim/controllers.hpp"
#include "wafersim/plant.hpp"
#include "wafersim/trajectory.hpp"

namespace wafersim {

using TrajectorySpec = std::variant<ScanProfileSpec, PulseProfileSpec>;

enum class VDotSource { Reference, Measured };

/// How e_dot, v and v_dot are estimated from the sampled position.
struct EstimatorSpec {
  double derivative_cutoff = 0.0;  // one-pole low-pass on e_dot and v [Hz]; 0 = raw backward difference
  VDotSource vdot_source = VDotSource::Reference;
  double vdot_cutoff = 200.0;      // low-pass on the differentiated velocity [Hz]
};

/// P = [[p1, p2], [p2, p4]] of the Lyapunov candidate V = Theta^T P Theta.
struct LyapunovWeights {
  double p1 = 2.0;
  double p2 = -1.0;
  double p4 = 1.0;
};

struct ProbeSpec {
  /// Record V; weights default to the theorem-mode gains when present.
  bool lyapunov = false;
  std::optional<LyapunovWeights> weights;
};

struct SimConfig {
  double control_rate = 10000.0;  // [Hz]
  int plant_substeps = 10;
  std::optional<double> duration;  // defaults to the trajectory length
  PlantParams plant;
  DisturbanceSpec disturbance;
  NoiseSpec noise;
  ControllerSpec controller;
  TrajectorySpec trajectory = ScanProfileSpec{};
  EstimatorSpec estimator;
  PlantLimits limits;
  double initial_error = 0.0;     // p(0) - r(0) [m]
  double initial_velocity = 0.0;  // [m/s]
  ProbeSpec probes;
  std::uint64_t seed = 1;         // seeds the measurement noise
  std::string label;

  double step() const { return 1.0 / control_rate; }
  void validate() const;
};

/// Sampled closed-loop run; arrays share one length.
struct RunRecord {
  std::string label;
  double step = 0.0;
  std::vector<double> t, r, r_ddot, p, e, v, u, s, h1, h2, V, z;
  std::vector<Phase> phase;

  // metadata
  std::string controller;
  std::string config_hash;
  std::string version;
  std::string trajectory_shape;
  double wall_time = 0.0;
  bool aborted = false;
  std::optional<std::size_t> abort_index;
  std::string abort_reason;
  std::optional<std::size_t> step_trigger_index;  // first sample with the step disturbance on
  std::optional<LyapunovWeights> lyapunov_weights;
  PhiForm phi_form = PhiForm::VariablePower;
  double K_bar = 4.0;
  double h3 = 0.0;

  std::size_t size() const { return t.size(); }
};

TrajectoryProfile build_trajectory(const TrajectorySpec& spec, double sample_rate);

/**
 * Zero-order-hold closed loop: each control tick samples the sensor, forms
 * e, e_dot and the scheduling acceleration, computes u, records the sample and
 * integrates the plant across the tick. Identical config and seed give
 * identical arrays. Plant divergence or a non-finite control term truncates the
 * record and sets the abort fields.
 */
RunRecord run(const SimConfig& config);

struct LyapunovStats {
  std::size_t qualifying = 0;  // samples with |s| > gamma that have a successor
  std::size_t decreasing = 0;
  double min_V = 0.0;
  double max_V = 0.0;
  std::vector<double> V;

  bool has_qualifying() const { return qualifying > 0; }
  double decrease_fraction() const {
    return qualifying == 0 ? 1.0 : static_cast<double>(decreasing) / static_cast<double>(qualifying);
  }
};

/**
 * V = Theta^T P Theta with Theta = [Phi_1(s), z] over records [begin, end),
 * where z is the integral state in the s-dynamics coordinates.
 */
LyapunovStats lyapunov_probe(const RunRecord& record, const LyapunovWeights& weights, double gamma,
                             std::size_t begin = 0, std::size_t end = SIZE_MAX);

/// Containment of |s| in [0, gamma] after first entry.
struct ContainmentStats {
  std::optional<std::size_t> first_entry;
  double max_after_entry = 0.0;  // largest |s| after first entry
  double slack = 0.0;            // max |s_{k+1} - s_k| over the run
  bool contained(double gamma) const { return first_entry && max_after_entry <= gamma + slack; }
};

ContainmentStats containment(const RunRecord& record, double gamma);

std::string version_string();

}  // namespace wafersim
