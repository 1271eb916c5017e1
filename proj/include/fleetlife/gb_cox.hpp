#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fleetlife/cox.hpp"
#include "fleetlife/rng.hpp"
#include "fleetlife/trees.hpp"
#include "fleetlife/types.hpp"

namespace fleetlife {

// Residual of the Breslow partial likelihood with respect to per-subject
// scores: delta_i - sum over event subjects j with y_j <= y_i of
// exp(s_i) / sum_{k in R_j} exp(s_k).
inline std::vector<double> cox_negative_gradient(
    const std::vector<double>& scores, const Dataset& train) {
  if (scores.size() != train.size())
    throw DomainError("cox_negative_gradient: score length mismatch");
  std::vector<double> time(train.size());
  std::vector<int> event(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    time[i] = train.records[i].observed_time;
    event[i] = train.records[i].event;
  }
  return breslow_negative_gradient(time, event, scores);
}

struct GbCoxParams {
  int n_stages = 200;
  double learning_rate = 0.05;
  int max_depth = 3;
  int min_leaf_size = 10;
  double subsample = 0.8;  // fraction per stage, drawn without replacement
  std::uint64_t seed = 0;

  void validate() const {
    if (n_stages < 0) throw ParameterError("gb-cox: n_stages must be >= 0");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
      throw ParameterError("gb-cox: learning_rate must be in (0, 1]");
    if (max_depth < 1) throw ParameterError("gb-cox: max_depth must be >= 1");
    if (min_leaf_size < 1)
      throw ParameterError("gb-cox: min_leaf_size must be >= 1");
    if (!(subsample > 0.0 && subsample <= 1.0))
      throw ParameterError("gb-cox: subsample must be in (0, 1]");
  }
};

// Stagewise regression trees fit to the partial-likelihood residuals;
// scores start at 0 and move by learning_rate times the leaf means.
struct GbCoxModel {
  std::vector<RegressionTree> stages;
  double learning_rate = 0.05;
  StepFunction baseline_cum_hazard;  // Breslow at the final training scores
  std::vector<double> loss_trace;    // -log PL before each stage + final
  std::vector<std::string> feature_names;
  GbCoxParams params;

  double risk_score(std::span<const double> x) const {
    if (x.size() != feature_names.size())
      throw DomainError("gb-cox predict: expected " +
                        std::to_string(feature_names.size()) +
                        " features, got " + std::to_string(x.size()));
    double score = 0.0;
    for (const auto& tree : stages) score += tree.predict(x);
    return learning_rate * score;
  }

  SurvivalCurve predict_survival(std::span<const double> x) const {
    const double risk = std::exp(risk_score(x));
    SurvivalCurve curve;
    curve.times = baseline_cum_hazard.times;
    curve.probs.reserve(curve.times.size());
    for (double h : baseline_cum_hazard.values)
      curve.probs.push_back(std::exp(-h * risk));
    return curve;
  }
};

inline GbCoxModel fit_gb_cox(const Dataset& train,
                             const GbCoxParams& params = {}) {
  params.validate();
  if (train.empty()) throw EmptyInputError("gb-cox: empty dataset");
  if (train.n_events() < 1)
    throw InsufficientDataError("gb-cox: needs at least one event");

  std::vector<double> time(train.size());
  std::vector<int> event(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    time[i] = train.records[i].observed_time;
    event[i] = train.records[i].event;
  }

  GbCoxModel model;
  model.feature_names = train.feature_names;
  model.learning_rate = params.learning_rate;
  model.params = params;

  Rng rng(params.seed);
  std::vector<double> scores(train.size(), 0.0);
  model.loss_trace.push_back(breslow_neg_log_likelihood(time, event, scores));

  const auto n_sub = static_cast<std::size_t>(
      std::max<double>(1.0, std::floor(params.subsample *
                                       static_cast<double>(train.size()))));
  for (int stage = 0; stage < params.n_stages; ++stage) {
    const auto gradient = breslow_negative_gradient(time, event, scores);

    std::vector<std::size_t> members;
    if (n_sub < train.size()) {
      members = rng.choose(train.size(), n_sub);
      std::sort(members.begin(), members.end());
    } else {
      members.resize(train.size());
      for (std::size_t i = 0; i < members.size(); ++i) members[i] = i;
    }

    detail::RegressionTreeGrower grower(train, gradient, params.max_depth,
                                        params.min_leaf_size);
    RegressionTree tree = grower.grow(std::move(members));

    for (std::size_t i = 0; i < train.size(); ++i)
      scores[i] += params.learning_rate * tree.predict(train.records[i].features);
    model.stages.push_back(std::move(tree));
    model.loss_trace.push_back(breslow_neg_log_likelihood(time, event, scores));
  }

  model.baseline_cum_hazard = breslow_cumulative_hazard(time, event, scores);
  return model;
}

}  // namespace fleetlife
