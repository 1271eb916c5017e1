#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fleetlife/kaplan_meier.hpp"
#include "fleetlife/types.hpp"

namespace fleetlife {

struct ConcordanceResult {
  double ci = 0.5;
  long long n_comparable = 0;
  bool applicable = false;  // false when no pair is comparable
};

// Harrell's concordance: a pair is comparable when the strictly earlier
// observed time belongs to an event subject; concordant when the higher risk
// goes with the shorter survival; tied risks count one half.
inline ConcordanceResult concordance_index(std::span<const double> risk,
                                           const Dataset& records) {
  if (risk.size() != records.size())
    throw DomainError("concordance_index: risk length mismatch");
  const auto n = records.size();
  long long comparable = 0;
  double concordant = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const auto& ra = records.records[a];
    if (!ra.event) continue;
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const auto& rb = records.records[b];
      if (!(ra.observed_time < rb.observed_time)) continue;
      ++comparable;
      if (risk[a] > risk[b]) concordant += 1.0;
      else if (risk[a] == risk[b]) concordant += 0.5;
    }
  }
  ConcordanceResult out;
  out.n_comparable = comparable;
  if (comparable == 0) return out;  // not applicable
  out.applicable = true;
  out.ci = concordant / static_cast<double>(comparable);
  return out;
}

enum class BrierMode { ipcw, naive };

inline std::string to_string(BrierMode mode) {
  return mode == BrierMode::ipcw ? "ipcw" : "naive";
}

struct BrierDiagnostics {
  int dropped_subjects = 0;  // censoring weight denominator was zero
};

// Kaplan-Meier estimate of the censoring distribution (events flipped).
inline SurvivalCurve censoring_distribution(const Dataset& records) {
  Dataset flipped;
  flipped.feature_names = records.feature_names;
  flipped.records = records.records;
  for (auto& r : flipped.records) r.event = 1 - r.event;
  return fit_kaplan_meier(flipped).curve;
}

namespace detail {

inline double brier_at(const std::vector<SurvivalCurve>& curves,
                       const Dataset& records, double t, BrierMode mode,
                       const SurvivalCurve& censor_curve,
                       BrierDiagnostics* diagnostics) {
  const auto n = records.size();
  if (mode == BrierMode::naive) {
    // The unweighted squared error against the observed status indicator.
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = curves[i].value_at(t);
      const double y = records.records[i].observed_time > t ? 1.0 : 0.0;
      sum += (s - y) * (s - y);
    }
    return sum / static_cast<double>(n);
  }

  // Inverse-probability-of-censoring weighting (Graf/Gerds-Schumacher):
  // failures by t weigh 1/G(y-), survivors past t weigh 1/G(t), subjects
  // censored by t contribute nothing. Subjects whose weight denominator is
  // zero are dropped and counted.
  double sum = 0.0;
  std::size_t kept = 0;
  int dropped = 0;
  const double g_t = censor_curve.value_at(t);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records.records[i];
    const double s = curves[i].value_at(t);
    if (r.observed_time <= t && r.event == 1) {
      const double g = censor_curve.value_before(r.observed_time);
      if (g <= 0.0) {
        ++dropped;
        continue;
      }
      sum += s * s / g;
      ++kept;
    } else if (r.observed_time > t) {
      if (g_t <= 0.0) {
        ++dropped;
        continue;
      }
      sum += (1.0 - s) * (1.0 - s) / g_t;
      ++kept;
    } else {
      ++kept;  // censored by t: zero contribution
    }
  }
  if (diagnostics) diagnostics->dropped_subjects += dropped;
  if (kept == 0) throw DomainError("brier_score: every subject was dropped");
  return sum / static_cast<double>(kept);
}

}  // namespace detail

inline double brier_score(const std::vector<SurvivalCurve>& curves,
                          const Dataset& records, double t,
                          BrierMode mode = BrierMode::ipcw,
                          BrierDiagnostics* diagnostics = nullptr) {
  if (curves.size() != records.size())
    throw DomainError("brier_score: one curve per record required");
  if (records.empty()) throw EmptyInputError("brier_score: empty dataset");
  if (t < 0.0) throw DomainError("brier_score: negative evaluation time");
  SurvivalCurve censor;
  if (mode == BrierMode::ipcw) censor = censoring_distribution(records);
  return detail::brier_at(curves, records, t, mode, censor, diagnostics);
}

// Default grid: evenly spaced between the first and last event time.
inline std::vector<double> default_brier_grid(const Dataset& records,
                                              int points = 100) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& r : records.records) {
    if (!r.event) continue;
    if (!any) {
      lo = hi = r.observed_time;
      any = true;
    } else {
      lo = std::min(lo, r.observed_time);
      hi = std::max(hi, r.observed_time);
    }
  }
  if (!any) throw InsufficientDataError("brier grid: no event times");
  if (points < 2) throw ParameterError("brier grid: needs >= 2 points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k)
    grid[static_cast<std::size_t>(k)] =
        lo + (hi - lo) * static_cast<double>(k) / (points - 1);
  return grid;
}

// Trapezoidal integral of BS(t) over the grid, divided by t_max (defaults to
// the last grid point). Optionally returns the per-point curve.
inline double integrated_brier_score(
    const std::vector<SurvivalCurve>& curves, const Dataset& records,
    std::span<const double> grid, BrierMode mode = BrierMode::ipcw,
    double t_max = 0.0,
    std::vector<std::pair<double, double>>* brier_curve = nullptr,
    BrierDiagnostics* diagnostics = nullptr) {
  if (grid.size() < 2)
    throw ParameterError("integrated_brier_score: grid needs >= 2 points");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid[k] < 0.0 || (k > 0 && !(grid[k] > grid[k - 1])))
      throw ParameterError("integrated_brier_score: grid must increase");
  }
  if (t_max == 0.0) t_max = grid.back();
  if (!(t_max > 0.0) || t_max < grid.back())
    throw ParameterError("integrated_brier_score: bad t_max");

  SurvivalCurve censor;
  if (mode == BrierMode::ipcw) censor = censoring_distribution(records);

  std::vector<double> bs(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    bs[k] = detail::brier_at(curves, records, grid[k], mode, censor,
                             diagnostics);
    if (brier_curve) brier_curve->emplace_back(grid[k], bs[k]);
  }
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k)
    integral += (grid[k + 1] - grid[k]) * 0.5 * (bs[k] + bs[k + 1]);
  return integral / t_max;
}

// Mean absolute percentage error; denominators are the actual counts.
inline double mape(std::span<const double> predicted,
                   std::span<const double> actual) {
  if (predicted.size() != actual.size())
    throw DomainError("mape: length mismatch");
  if (predicted.empty()) throw EmptyInputError("mape: no predictions");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!(actual[i] > 0.0))
      throw DomainError("mape: actual count at index " + std::to_string(i) +
                        " is not positive; percentage undefined");
    sum += std::abs(actual[i] - predicted[i]) / actual[i];
  }
  return 100.0 * sum / static_cast<double>(predicted.size());
}

struct MetricReport {
  std::optional<double> ci;  // absent when no comparable pairs exist
  long long n_comparable_pairs = 0;
  double ibs = 0.0;
  std::vector<std::pair<double, double>> brier_curve;
  double t_max = 0.0;
  std::optional<double> mape_percent;
  BrierMode brier_mode = BrierMode::ipcw;
  int dropped_subjects = 0;
};

}  // namespace fleetlife
