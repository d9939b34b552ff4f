#include "wafersim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "wafersim/format.hpp"

namespace wafersim {

MetricsReport phase_metrics(std::span<const double> e, std::span<const Phase> phase) {
  if (e.size() != phase.size()) throw std::invalid_argument("metrics: error and phase lengths differ");
  std::array<double, 3> sum_sq{};
  std::array<double, 3> peak{};
  std::array<std::size_t, 3> count{};
  for (std::size_t k = 0; k < e.size(); ++k) {
    const auto i = static_cast<std::size_t>(phase[k]);
    sum_sq[i] += e[k] * e[k];
    peak[i] = std::max(peak[i], std::abs(e[k]));
    ++count[i];
  }
  MetricsReport out;
  for (std::size_t i = 0; i < 3; ++i) {
    if (count[i] == 0) continue;
    out.phases[i] = PhaseStats{std::sqrt(sum_sq[i] / static_cast<double>(count[i])), peak[i], count[i]};
  }
  return out;
}

MetricsReport phase_metrics(const RunRecord& record) {
  MetricsReport out = phase_metrics(record.e, record.phase);
  out.label = record.label;
  return out;
}

std::vector<double> default_band_grid() {
  std::vector<double> grid;
  constexpr int per_decade = 40;
  for (int i = -10 * per_decade; i <= -2 * per_decade; ++i) {
    grid.push_back(std::pow(10.0, static_cast<double>(i) / per_decade));
  }
  return grid;
}

std::vector<std::pair<std::size_t, std::size_t>> phase_segments(std::span<const Phase> phase, Phase which) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t k = 0;
  while (k < phase.size()) {
    if (phase[k] != which) {
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end < phase.size() && phase[end] == which) ++end;
    out.emplace_back(k, end);
    k = end;
  }
  return out;
}

double held_ratio(std::span<const double> e, std::span<const Phase> phase, double band) {
  std::size_t held = 0, total = 0;
  for (auto [begin, end] : phase_segments(phase, Phase::SP)) {
    std::size_t start = begin;
    for (std::size_t k = begin; k < end; ++k) {
      if (std::abs(e[k]) > band) start = k + 1;
    }
    held += end - start;
    total += end - begin;
  }
  return total == 0 ? 0.0 : static_cast<double>(held) / static_cast<double>(total);
}

ScanMetrics valid_scan_metrics(std::span<const double> e, std::span<const Phase> phase,
                               double ratio_target, std::span<const double> band_grid) {
  if (e.size() != phase.size()) throw std::invalid_argument("metrics: error and phase lengths differ");
  if (phase_segments(phase, Phase::SP).empty()) throw std::invalid_argument("metrics: record has no scan phase");
  if (!(ratio_target > 0.0 && ratio_target <= 1.0)) throw std::invalid_argument("metrics: ratio_target must lie in (0, 1]");
  std::vector<double> fallback;
  if (band_grid.empty()) {
    fallback = default_band_grid();
    band_grid = fallback;
  }
  if (!std::is_sorted(band_grid.begin(), band_grid.end()) || band_grid.front() <= 0.0) {
    throw std::invalid_argument("metrics: band grid must be positive and ascending");
  }
  ScanMetrics out;
  out.ratio_target = ratio_target;
  double best = 0.0;
  for (double band : band_grid) {
    const double ratio = held_ratio(e, phase, band);
    best = std::max(best, ratio);
    if (ratio >= ratio_target) {
      out.e_s = band;
      out.tp_over_ts = ratio;
      out.target_met = true;
      return out;
    }
  }
  double sp_max = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (phase[k] == Phase::SP) sp_max = std::max(sp_max, std::abs(e[k]));
  }
  out.e_s = sp_max;
  out.tp_over_ts = best;
  return out;
}

ScanMetrics valid_scan_metrics(const RunRecord& record, double ratio_target, std::span<const double> band_grid) {
  return valid_scan_metrics(record.e, record.phase, ratio_target, band_grid);
}

MetricsReport full_report(const RunRecord& record, double ratio_target, std::span<const double> band_grid) {
  MetricsReport out = phase_metrics(record);
  if (!phase_segments(record.phase, Phase::SP).empty()) {
    out.scan = valid_scan_metrics(record, ratio_target, band_grid);
  }
  return out;
}

namespace {

std::string cell(const std::optional<double>& x) { return x ? number(*x) : "-"; }

std::string sci(const std::optional<double>& x) {
  if (!x) return "-";
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << *x;
  return os.str();
}

}  // namespace

ComparisonTable comparison_table(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw std::invalid_argument("comparison_table: need at least one report");
  const std::vector<std::string> header = {"controller", "IP_rms", "IP_max", "AD_rms", "AD_max",
                                           "SP_rms",     "SP_max", "e_s",    "tp_over_ts"};
  std::vector<std::vector<std::optional<double>>> rows;
  for (const auto& r : reports) {
    std::vector<std::optional<double>> row;
    for (Phase p : {Phase::IP, Phase::AD, Phase::SP}) {
      const auto& st = r[p];
      row.push_back(st ? std::optional<double>(st->rms) : std::nullopt);
      row.push_back(st ? std::optional<double>(st->max) : std::nullopt);
    }
    row.push_back(r.scan ? std::optional<double>(r.scan->e_s) : std::nullopt);
    row.push_back(r.scan ? std::optional<double>(r.scan->tp_over_ts) : std::nullopt);
    rows.push_back(std::move(row));
  }

  ComparisonTable out;
  for (std::size_t i = 0; i < header.size(); ++i) out.csv += (i ? "," : "") + header[i];
  out.csv += '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.csv += reports[r].label;
    for (const auto& x : rows[r]) out.csv += "," + cell(x);
    out.csv += '\n';
  }

  std::vector<std::vector<std::string>> grid{header};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<std::string> line{reports[r].label};
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c + 1 == rows[r].size() && rows[r][c]) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(4) << *rows[r][c];
        line.push_back(os.str());
      } else {
        line.push_back(sci(rows[r][c]));
      }
    }
    grid.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : grid) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  for (const auto& line : grid) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      std::string pad(width[c] - line[c].size(), ' ');
      out.text += c == 0 ? line[c] + pad : "  " + pad + line[c];
    }
    out.text += '\n';
  }
  return out;
}

double max_abs(std::span<const double> xs) {
  double m = 0.0;
  for (double x : xs) m = std::max(m, std::abs(x));
  return m;
}

DisturbanceResponse disturbance_response(const RunRecord& record, std::size_t begin, std::size_t end,
                                         double decay_fraction) {
  DisturbanceResponse out;
  end = std::min(end, record.size());
  if (begin >= end) return out;
  out.peak_index = begin;
  for (std::size_t k = begin; k < end; ++k) {
    if (std::abs(record.e[k]) > out.peak) {
      out.peak = std::abs(record.e[k]);
      out.peak_index = k;
    }
  }
  const double threshold = decay_fraction * out.peak;
  std::size_t last_above = out.peak_index;
  for (std::size_t k = out.peak_index; k < end; ++k) {
    if (std::abs(record.e[k]) > threshold) last_above = k;
  }
  if (last_above + 1 < end) {
    out.decay_time = static_cast<double>(last_above + 1 - out.peak_index) * record.step;
  }
  return out;
}

}  // namespace wafersim
