#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fleetlife/dataset.hpp"
#include "fleetlife/types.hpp"

namespace fleetlife {

struct CalibrationPair {
  double p = 0.0;  // raw predicted failure probability
  int y = 0;       // observed outcome
  double w = 1.0;  // positive weight
};

// Optimal non-decreasing step map from raw to calibrated probabilities.
// Evaluation is step-constant between breakpoints and clamps to the end
// values outside the fitted range.
struct IsotonicMap {
  std::vector<double> breakpoints;  // strictly increasing p values
  std::vector<double> values;       // non-decreasing outputs in [0, 1]

  double apply(double p) const {
    if (!(p >= 0.0 && p <= 1.0))
      throw DomainError("isotonic apply: probability outside [0,1]");
    if (breakpoints.empty()) return p;
    auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), p);
    if (it == breakpoints.begin()) return values.front();
    return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
  }
};

inline double apply_isotonic(const IsotonicMap& map, double p) {
  return map.apply(p);
}

// Weighted isotonic least squares by pool-adjacent-violators. Ties in p are
// ordered by y descending (then input order) so that every tied-p group pools
// into one block and the map stays a function of p.
inline IsotonicMap fit_isotonic(std::vector<CalibrationPair> pairs) {
  if (pairs.size() < 2)
    throw InsufficientDataError("isotonic: needs at least two pairs");
  for (const auto& pr : pairs) {
    if (!(pr.p >= 0.0 && pr.p <= 1.0))
      throw DomainError("isotonic: probability outside [0,1]");
    if (pr.y != 0 && pr.y != 1)
      throw DomainError("isotonic: labels must be 0 or 1");
    if (!(pr.w > 0.0)) throw DomainError("isotonic: weights must be positive");
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const CalibrationPair& a, const CalibrationPair& b) {
                     if (a.p != b.p) return a.p < b.p;
                     return a.y > b.y;
                   });

  struct Block {
    double weight;
    double mean;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(pairs.size());
  for (const auto& pr : pairs) {
    blocks.push_back({pr.w, static_cast<double>(pr.y), 1});
    while (blocks.size() > 1 &&
           blocks[blocks.size() - 2].mean > blocks.back().mean) {
      const Block top = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      const double w = prev.weight + top.weight;
      prev.mean = (prev.weight * prev.mean + top.weight * top.mean) / w;
      prev.weight = w;
      prev.count += top.count;
    }
  }

  std::vector<double> fitted;
  fitted.reserve(pairs.size());
  for (const auto& b : blocks)
    fitted.insert(fitted.end(), b.count, std::clamp(b.mean, 0.0, 1.0));

  IsotonicMap map;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!map.breakpoints.empty() && pairs[i].p == map.breakpoints.back())
      continue;  // tied p shares the same fitted value by the sort order
    map.breakpoints.push_back(pairs[i].p);
    map.values.push_back(fitted[i]);
  }
  return map;
}

// Pairs (predicted window failure probability, observed outcome) from a past,
// resolved window. Subjects censored strictly inside (t0, t1) are excluded;
// their window status is unknown.
inline std::vector<CalibrationPair> build_calibration_pairs(
    const std::map<std::string, double>& predictions, const Dataset& truth,
    const PredictionWindow& w) {
  w.validate();
  std::vector<CalibrationPair> pairs;
  for (const auto& rec : truth.records) {
    auto it = predictions.find(rec.id);
    if (it == predictions.end()) continue;
    int label;
    if (rec.event == 1) {
      label = 1;  // failed inside the window
    } else if (rec.last_log_date >= w.t1) {
      label = 0;  // observed alive at t1
    } else {
      continue;  // censored mid-window
    }
    pairs.push_back({it->second, label, 1.0});
  }
  if (pairs.empty())
    throw InsufficientDataError(
        "calibration: no resolvable subjects in the past window");
  return pairs;
}

}  // namespace fleetlife
