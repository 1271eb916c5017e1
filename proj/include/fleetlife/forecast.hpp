#pragma once

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fleetlife/dataset.hpp"
#include "fleetlife/isotonic.hpp"
#include "fleetlife/types.hpp"

namespace fleetlife {

// S(j)/S(i): probability of surviving to j given survival to i.
inline double conditional_survival(const SurvivalCurve& curve, double i,
                                   double j) {
  if (i < 0.0 || j < 0.0)
    throw DomainError("conditional_survival: negative time");
  if (i > j)
    throw DomainError("conditional_survival: arguments out of order (i > j)");
  if (i == j) return 1.0;
  const double si = curve.value_at(i);
  if (si <= 0.0)
    throw DomainError(
        "conditional_survival: conditioning on impossible event, S(i) = 0");
  const double ratio = curve.value_at(j) / si;
  return std::min(ratio, 1.0);
}

// F(t_{i,j}) = 1 - S(j)/S(i), optionally passed through a calibration map.
inline double window_failure_probability(const SurvivalCurve& curve, double i,
                                         double j,
                                         const IsotonicMap* map = nullptr) {
  const double f = 1.0 - conditional_survival(curve, i, j);
  return map ? map->apply(f) : f;
}

// Independent-Bernoulli aggregation: (sum p_i, sum p_i (1 - p_i)).
inline std::pair<double, double> expected_failures(
    std::span<const double> probs) {
  double expectation = 0.0, variance = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0))
      throw DomainError("expected_failures: probability outside [0,1]");
    expectation += p;
    variance += p * (1.0 - p);
  }
  return {expectation, variance};
}

// Per-subject operational interval (i, j) for a calendar window: i is the
// exposure at t0, j projects it forward at the subject's historical usage
// rate. Subjects with no usage history yet fall back to the fleet mean rate.
struct OperationalWindow {
  double start = 0.0;
  double end = 0.0;
};

inline double fleet_mean_usage_rate(const Dataset& ds) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : ds.records) {
    const double rate = usage_rate(r);
    if (rate > 0.0) {
      sum += rate;
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

inline OperationalWindow operational_window(const SurvivalRecord& r,
                                            const PredictionWindow& w,
                                            double fallback_rate) {
  const double start = exposure_at(r, w.t0);
  double rate = usage_rate(r);
  if (!(rate > 0.0)) rate = fallback_rate;
  const double end = start + rate * days_between(w.t0, w.t1);
  return {start, end};
}

struct FailureForecast {
  std::map<std::string, double> per_subject;  // id -> failure probability
  double expected_failures = 0.0;
  double variance = 0.0;
  bool calibrated = false;
  std::vector<std::string> excluded_ids;  // subjects with model S(i) = 0
  int excluded_count = 0;
};

// Forecasts the expected number of failures in (t0, t1] over the at-risk
// fleet. Subjects the model assigns S(i) = 0 (stale or erroneous exposures)
// are excluded from the sum and reported rather than counted as certain
// failures. Summation follows record order for reproducibility.
template <class Model>
FailureForecast forecast_window(const Model& model, const Dataset& at_risk,
                                const PredictionWindow& w,
                                const IsotonicMap* map = nullptr) {
  w.validate();
  const double fallback = fleet_mean_usage_rate(at_risk);
  FailureForecast out;
  out.calibrated = map != nullptr;

  std::vector<double> probs;
  probs.reserve(at_risk.size());
  for (const auto& rec : at_risk.records) {
    const auto ow = operational_window(rec, w, fallback);
    const SurvivalCurve curve = model.predict_survival(rec.features, ow.end);
    if (curve.value_at(ow.start) <= 0.0) {
      out.excluded_ids.push_back(rec.id);
      ++out.excluded_count;
      continue;
    }
    const double p = window_failure_probability(curve, ow.start, ow.end, map);
    out.per_subject[rec.id] = p;
    probs.push_back(p);
  }
  const auto [expectation, variance] = expected_failures(probs);
  out.expected_failures = expectation;
  out.variance = variance;
  return out;
}

}  // namespace fleetlife
