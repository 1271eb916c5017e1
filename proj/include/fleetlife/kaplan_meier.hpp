#pragma once

#include <algorithm>
#include <vector>

#include "fleetlife/types.hpp"

namespace fleetlife {

// Product-limit estimator. The curve steps only at distinct event times;
// censored subjects leave the risk set without creating steps, and ties at
// one time are absorbed into a single factor.
struct KaplanMeierModel {
  SurvivalCurve curve;
  std::vector<double> event_times;  // T_j, ascending
  std::vector<int> event_counts;    // d_j
  std::vector<int> risk_counts;     // r_j

  SurvivalCurve predict_survival() const { return curve; }
};

inline KaplanMeierModel fit_kaplan_meier(const Dataset& train) {
  if (train.empty()) throw EmptyInputError("kaplan-meier: empty dataset");

  std::vector<std::pair<double, int>> obs;  // (time, event)
  obs.reserve(train.size());
  for (const auto& r : train.records) obs.emplace_back(r.observed_time, r.event);
  std::sort(obs.begin(), obs.end());

  KaplanMeierModel model;
  double survival = 1.0;
  std::size_t i = 0;
  std::size_t at_risk = obs.size();
  while (i < obs.size()) {
    const double t = obs[i].first;
    int deaths = 0;
    std::size_t group = 0;
    while (i + group < obs.size() && obs[i + group].first == t) {
      deaths += obs[i + group].second;
      ++group;
    }
    if (deaths > 0) {
      survival *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      model.event_times.push_back(t);
      model.event_counts.push_back(deaths);
      model.risk_counts.push_back(static_cast<int>(at_risk));
      model.curve.times.push_back(t);
      model.curve.probs.push_back(survival);
    }
    at_risk -= group;
    i += group;
  }
  return model;
}

}  // namespace fleetlife
