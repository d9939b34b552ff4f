#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wafersim/simulator.hpp"
#include "wafersim/trajectory.hpp"

namespace wafersim {

struct PhaseStats {
  double rms = 0.0;
  double max = 0.0;
  std::size_t samples = 0;
};

struct ScanMetrics {
  double e_s = 0.0;         // valid scanning error: half-width of the held band [m]
  double tp_over_ts = 0.0;  // valid scanning time over total scanning time
  double ratio_target = 0.95;
  bool target_met = false;
};

struct MetricsReport {
  std::string label;
  std::array<std::optional<PhaseStats>, 3> phases;  // indexed by Phase; empty phase -> nullopt
  std::optional<ScanMetrics> scan;

  const std::optional<PhaseStats>& operator[](Phase p) const { return phases[static_cast<std::size_t>(p)]; }
};

/// Per-phase RMS sqrt(mean e^2) and MAX max|e|.
MetricsReport phase_metrics(std::span<const double> e, std::span<const Phase> phase);
MetricsReport phase_metrics(const RunRecord& record);

/// Log-spaced bands from 0.1 nm to 10 mm, 40 per decade.
std::vector<double> default_band_grid();

/// Fraction of scan time spent inside [-band, band] after the last escape,
/// pooled over all scan segments.
double held_ratio(std::span<const double> e, std::span<const Phase> phase, double band);

/**
 * Smallest grid band whose held ratio reaches `ratio_target`. When no band
 * gets there, e_s is max|e| over the scan and tp_over_ts the best ratio seen.
 */
ScanMetrics valid_scan_metrics(std::span<const double> e, std::span<const Phase> phase,
                               double ratio_target, std::span<const double> band_grid);
ScanMetrics valid_scan_metrics(const RunRecord& record, double ratio_target = 0.95,
                               std::span<const double> band_grid = {});

MetricsReport full_report(const RunRecord& record, double ratio_target = 0.95,
                          std::span<const double> band_grid = {});

struct ComparisonTable {
  std::string csv;
  std::string text;
};

/// One row per report in input order; missing phases print as "-".
ComparisonTable comparison_table(std::span<const MetricsReport> reports);

// Analysis helpers shared by the experiment presets.

double max_abs(std::span<const double> xs);

/// Start/end (exclusive) sample indices of each contiguous run of `phase`.
std::vector<std::pair<std::size_t, std::size_t>> phase_segments(std::span<const Phase> phase, Phase which);

struct DisturbanceResponse {
  double peak = 0.0;
  std::size_t peak_index = 0;
  std::optional<double> decay_time;  // peak -> staying below decay_fraction * peak
};

DisturbanceResponse disturbance_response(const RunRecord& record, std::size_t begin, std::size_t end,
                                         double decay_fraction = 0.1);

}  // namespace wafersim
