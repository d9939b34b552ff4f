#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace wafersim {

/// Physical stage parameters; the composite gains are their ratios.
struct PhysicalParams {
  double mass = 0.0;            // m [kg]
  double viscous_friction = 0.0;  // K_v [N s/m]
  double force_constant = 0.0;  // Q [N/V]
};

/**
 * Single-axis stage model  v' = -T_v v + K u + d.
 *
 * K and T_v drive the simulated plant; K_bar and T_v_bar are the nominal
 * values handed to model-based controllers.
 */
struct PlantParams {
  double K = 4.0;
  double T_v = 1.0;
  double K_bar = 4.0;
  double T_v_bar = 1.0;
  std::optional<PhysicalParams> physical;

  static PlantParams from_physical(const PhysicalParams& phys, double K_bar, double T_v_bar);

  double delta_K() const { return K - K_bar; }
  double delta_T_v() const { return T_v - T_v_bar; }

  void validate() const;
};

/// Lumped disturbance d = (d_f + d_r)/m in m/s^2, plus an optional latched step.
struct DisturbanceSpec {
  double constant = 0.0;
  double ripple_amplitude = 0.0;
  double ripple_period = 0.016;    // spatial period [m]
  double friction_residual = 0.0;  // opposes the direction of motion
  double step_amplitude = 0.0;
  std::optional<double> step_trigger_position;

  void validate() const;
};

struct NoiseSpec {
  double power = 0.0;   // variance of the white source per sample [m^2]
  double cutoff = 0.0;  // one-pole low-pass corner [Hz]; <= 0 or >= Nyquist disables it
  std::uint64_t seed = 1;

  void validate() const;
};

struct PlantState {
  double p = 0.0;
  double v = 0.0;
  double t = 0.0;
  bool step_latched = false;
};

struct PlantLimits {
  double max_speed = 100.0;  // |v| above this aborts the run [m/s]
};

class PlantDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lumped disturbance at the given state.
double disturbance_at(const DisturbanceSpec& dist, const PlantState& state);

/**
 * Advance the plant over `h` seconds with `u` held constant, using classical
 * RK4 at h/substeps. The step disturbance latches on the first substep whose
 * end point reaches the trigger position and stays on afterwards.
 */
PlantState plant_step(const PlantState& state, const PlantParams& params,
                      const DisturbanceSpec& dist, double u, double h, int substeps,
                      const PlantLimits& limits = {});

/// Position sensor with band-limited Gaussian noise; one instance per run.
class MeasurementChannel {
 public:
  MeasurementChannel(const NoiseSpec& noise, double sample_rate);

  double measure(const PlantState& state);

  /// Filter coefficient of the one-pole low-pass (1 when bypassed).
  double smoothing() const { return beta_; }

 private:
  NoiseSpec spec_;
  double sigma_;
  double beta_;
  double filtered_ = 0.0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace wafersim
