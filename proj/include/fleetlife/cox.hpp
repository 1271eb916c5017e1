#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fleetlife/types.hpp"

namespace fleetlife {

namespace detail {

// Ascending-time permutation shared by the partial-likelihood routines.
inline std::vector<std::size_t> time_order(const std::vector<double>& time) {
  std::vector<std::size_t> order(time.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });
  return order;
}

struct CoxEval {
  double loglik = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd gradient;
  Eigen::MatrixXd fisher;  // negated Hessian of the log partial likelihood
};

// Breslow-tie log partial likelihood with optional derivatives. Walks event
// times from largest to smallest, accumulating risk-set sums once.
inline CoxEval cox_eval(const std::vector<double>& time,
                        const std::vector<int>& event,
                        const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                        const std::vector<std::size_t>& order,
                        bool want_derivatives) {
  const auto n = static_cast<std::ptrdiff_t>(time.size());
  const auto p = x.cols();
  CoxEval out;
  if (want_derivatives) {
    out.gradient = Eigen::VectorXd::Zero(p);
    out.fisher = Eigen::MatrixXd::Zero(p, p);
  }

  const Eigen::VectorXd lp = x * beta;
  double ll = 0.0;
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

  std::ptrdiff_t i = n - 1;
  while (i >= 0) {
    const double t = time[order[static_cast<std::size_t>(i)]];
    std::ptrdiff_t j = i;
    while (j >= 0 && time[order[static_cast<std::size_t>(j)]] == t) {
      const std::size_t k = order[static_cast<std::size_t>(j)];
      const double w = std::exp(lp[static_cast<Eigen::Index>(k)]);
      s0 += w;
      if (want_derivatives) {
        s1.noalias() += w * x.row(static_cast<Eigen::Index>(k)).transpose();
        s2.noalias() += w * x.row(static_cast<Eigen::Index>(k)).transpose() *
                        x.row(static_cast<Eigen::Index>(k));
      }
      --j;
    }
    int deaths = 0;
    double lp_events = 0.0;
    Eigen::VectorXd x_events = Eigen::VectorXd::Zero(p);
    for (std::ptrdiff_t m = i; m > j; --m) {
      const std::size_t k = order[static_cast<std::size_t>(m)];
      if (event[k]) {
        ++deaths;
        lp_events += lp[static_cast<Eigen::Index>(k)];
        if (want_derivatives)
          x_events += x.row(static_cast<Eigen::Index>(k)).transpose();
      }
    }
    if (deaths > 0) {
      if (!(s0 > 0.0) || !std::isfinite(s0)) return out;  // loglik = -inf
      ll += lp_events - deaths * std::log(s0);
      if (want_derivatives) {
        const Eigen::VectorXd mu = s1 / s0;
        out.gradient += x_events - deaths * mu;
        out.fisher += deaths * (s2 / s0 - mu * mu.transpose());
      }
    }
    i = j;
  }
  if (std::isfinite(ll)) out.loglik = ll;
  return out;
}

}  // namespace detail

// === score-based Breslow machinery (shared with the boosted model) ===

// -log partial likelihood evaluated at arbitrary per-subject scores.
inline double breslow_neg_log_likelihood(const std::vector<double>& time,
                                         const std::vector<int>& event,
                                         const std::vector<double>& scores) {
  if (time.size() != event.size() || time.size() != scores.size())
    throw DomainError("breslow: input length mismatch");
  const auto order = detail::time_order(time);
  double ll = 0.0;
  double s0 = 0.0;
  std::ptrdiff_t i = static_cast<std::ptrdiff_t>(time.size()) - 1;
  while (i >= 0) {
    const double t = time[order[static_cast<std::size_t>(i)]];
    std::ptrdiff_t j = i;
    while (j >= 0 && time[order[static_cast<std::size_t>(j)]] == t) {
      s0 += std::exp(scores[order[static_cast<std::size_t>(j)]]);
      --j;
    }
    for (std::ptrdiff_t m = i; m > j; --m) {
      const std::size_t k = order[static_cast<std::size_t>(m)];
      if (event[k]) ll += scores[k] - std::log(s0);
    }
    i = j;
  }
  return -ll;
}

// Per-subject residual of the Breslow partial likelihood:
//   delta_i - exp(s_i) * sum_{event times T_j <= y_i} d_j / S0_j.
inline std::vector<double> breslow_negative_gradient(
    const std::vector<double>& time, const std::vector<int>& event,
    const std::vector<double>& scores) {
  if (time.size() != event.size() || time.size() != scores.size())
    throw DomainError("breslow: input length mismatch");
  const auto order = detail::time_order(time);
  const std::size_t n = time.size();

  // Risk sums at each distinct event time, walking descending.
  std::vector<double> event_t, inv_sum;  // T_j asc, d_j / S0_j
  {
    std::vector<double> t_desc, v_desc;
    double s0 = 0.0;
    std::ptrdiff_t i = static_cast<std::ptrdiff_t>(n) - 1;
    while (i >= 0) {
      const double t = time[order[static_cast<std::size_t>(i)]];
      std::ptrdiff_t j = i;
      int deaths = 0;
      while (j >= 0 && time[order[static_cast<std::size_t>(j)]] == t) {
        const std::size_t k = order[static_cast<std::size_t>(j)];
        s0 += std::exp(scores[k]);
        deaths += event[k];
        --j;
      }
      if (deaths > 0) {
        t_desc.push_back(t);
        v_desc.push_back(deaths / s0);
      }
      i = j;
    }
    event_t.assign(t_desc.rbegin(), t_desc.rend());
    inv_sum.assign(v_desc.rbegin(), v_desc.rend());
  }
  // Cumulative hazard lookup Σ_{T_j <= t} d_j / S0_j.
  std::vector<double> cum(inv_sum.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < inv_sum.size(); ++k) {
    acc += inv_sum[k];
    cum[k] = acc;
  }

  std::vector<double> grad(n);
  for (std::size_t i2 = 0; i2 < n; ++i2) {
    auto it = std::upper_bound(event_t.begin(), event_t.end(), time[i2]);
    const double h =
        it == event_t.begin()
            ? 0.0
            : cum[static_cast<std::size_t>(it - event_t.begin()) - 1];
    grad[i2] = event[i2] - std::exp(scores[i2]) * h;
  }
  return grad;
}

// Breslow baseline cumulative hazard H0 at the given scores.
inline StepFunction breslow_cumulative_hazard(const std::vector<double>& time,
                                              const std::vector<int>& event,
                                              const std::vector<double>& scores) {
  if (time.size() != event.size() || time.size() != scores.size())
    throw DomainError("breslow: input length mismatch");
  const auto order = detail::time_order(time);
  std::vector<double> t_desc, v_desc;
  double s0 = 0.0;
  std::ptrdiff_t i = static_cast<std::ptrdiff_t>(time.size()) - 1;
  while (i >= 0) {
    const double t = time[order[static_cast<std::size_t>(i)]];
    std::ptrdiff_t j = i;
    int deaths = 0;
    while (j >= 0 && time[order[static_cast<std::size_t>(j)]] == t) {
      const std::size_t k = order[static_cast<std::size_t>(j)];
      s0 += std::exp(scores[k]);
      deaths += event[k];
      --j;
    }
    if (deaths > 0) {
      t_desc.push_back(t);
      v_desc.push_back(deaths / s0);
    }
    i = j;
  }
  StepFunction h0;
  h0.times.assign(t_desc.rbegin(), t_desc.rend());
  h0.values.resize(v_desc.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < v_desc.size(); ++k) {
    acc += v_desc[v_desc.size() - 1 - k];
    h0.values[k] = acc;
  }
  return h0;
}

// === Cox proportional hazards ===

struct CoxOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;  // convergence on max-norm of the gradient
  double beta_bound = 50.0;          // separation guard on max-norm of beta
};

struct CoxModel {
  std::vector<std::string> feature_names;
  std::vector<double> beta;
  std::vector<double> feature_means;  // covariates centered by training means
  StepFunction baseline_cum_hazard;   // H0 at the mean covariate
  int iterations = 0;
  double gradient_max_norm = 0.0;
  double log_likelihood = 0.0;
  std::vector<double> loglik_trace;  // per-iteration, non-decreasing

  double risk_score(std::span<const double> x) const {
    if (x.size() != beta.size())
      throw DomainError("cox predict: expected " + std::to_string(beta.size()) +
                        " features, got " + std::to_string(x.size()));
    double lp = 0.0;
    for (std::size_t k = 0; k < beta.size(); ++k)
      lp += (x[k] - feature_means[k]) * beta[k];
    return lp;
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

inline SurvivalCurve predict_cox_survival(const CoxModel& m,
                                          std::span<const double> x) {
  return m.predict_survival(x);
}

// Log partial likelihood (Breslow ties) at beta over raw covariates. The
// value is invariant to covariate centering, so this matches the centered
// internal fit.
inline double cox_log_partial_likelihood(const Dataset& train,
                                         std::span<const double> beta) {
  if (beta.size() != train.feature_names.size())
    throw DomainError("cox loglik: beta width mismatch");
  std::vector<double> time, scores;
  std::vector<int> event;
  for (const auto& r : train.records) {
    time.push_back(r.observed_time);
    event.push_back(r.event);
    double lp = 0.0;
    for (std::size_t k = 0; k < beta.size(); ++k) lp += r.features[k] * beta[k];
    scores.push_back(lp);
  }
  return -breslow_neg_log_likelihood(time, event, scores);
}

inline std::vector<double> cox_log_partial_likelihood_gradient(
    const Dataset& train, std::span<const double> beta) {
  if (beta.size() != train.feature_names.size())
    throw DomainError("cox gradient: beta width mismatch");
  const auto n = static_cast<Eigen::Index>(train.size());
  const auto p = static_cast<Eigen::Index>(beta.size());
  std::vector<double> time(train.size());
  std::vector<int> event(train.size());
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = train.records[static_cast<std::size_t>(i)];
    time[static_cast<std::size_t>(i)] = r.observed_time;
    event[static_cast<std::size_t>(i)] = r.event;
    for (Eigen::Index k = 0; k < p; ++k)
      x(i, k) = r.features[static_cast<std::size_t>(k)];
  }
  Eigen::VectorXd b(p);
  for (Eigen::Index k = 0; k < p; ++k) b[k] = beta[static_cast<std::size_t>(k)];
  const auto order = detail::time_order(time);
  const auto eval = detail::cox_eval(time, event, x, b, order, true);
  return {eval.gradient.data(), eval.gradient.data() + eval.gradient.size()};
}

// Newton-Raphson with step-halving on the Breslow log partial likelihood.
// Exactly collinear columns (e.g. a full one-hot block) leave the likelihood
// flat along a direction; a Levenberg diagonal bump keeps such steps finite
// without moving the optimum, and predictions are unaffected.
inline CoxModel fit_cox(const Dataset& train, const CoxOptions& opts = {}) {
  if (train.empty()) throw EmptyInputError("cox: empty dataset");
  if (train.n_events() < 1)
    throw InsufficientDataError("cox: needs at least one event");
  const auto n = static_cast<Eigen::Index>(train.size());
  const auto p = static_cast<Eigen::Index>(train.feature_names.size());
  if (p == 0) throw DomainError("cox: no features");

  std::vector<double> time(train.size());
  std::vector<int> event(train.size());
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = train.records[static_cast<std::size_t>(i)];
    time[static_cast<std::size_t>(i)] = r.observed_time;
    event[static_cast<std::size_t>(i)] = r.event;
    for (Eigen::Index k = 0; k < p; ++k)
      x(i, k) = r.features[static_cast<std::size_t>(k)];
  }

  const Eigen::VectorXd means = x.colwise().mean();
  x.rowwise() -= means.transpose();
  for (Eigen::Index k = 0; k < p; ++k) {
    if (x.col(k).cwiseAbs().maxCoeff() == 0.0)
      throw DegenerateFeatureError("cox: feature \"" +
                                   train.feature_names[static_cast<std::size_t>(k)] +
                                   "\" has zero variance");
  }

  const auto order = detail::time_order(time);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  auto eval = detail::cox_eval(time, event, x, beta, order, true);

  CoxModel model;
  model.feature_names = train.feature_names;
  model.loglik_trace.push_back(eval.loglik);

  int iter = 0;
  while (iter < opts.max_iterations &&
         eval.gradient.lpNorm<Eigen::Infinity>() >= opts.gradient_tolerance) {
    ++iter;

    Eigen::VectorXd step;
    double lambda = 0.0;
    const double diag_scale = std::max(1.0, eval.fisher.diagonal().maxCoeff());
    for (int tries = 0;; ++tries) {
      if (tries > 60) throw ConvergenceError("cox: newton step failed");
      Eigen::MatrixXd h = eval.fisher;
      if (lambda > 0.0)
        h.diagonal().array() += lambda;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      if (ldlt.info() == Eigen::Success) {
        step = ldlt.solve(eval.gradient);
        const double resid = (h * step - eval.gradient).lpNorm<Eigen::Infinity>();
        const double scale =
            std::max(1.0, eval.gradient.lpNorm<Eigen::Infinity>());
        if (step.allFinite() && resid <= 1e-8 * scale) break;
      }
      lambda = lambda == 0.0 ? 1e-10 * diag_scale : lambda * 10.0;
    }

    // Step-halving keeps the likelihood non-decreasing.
    double scale = 1.0;
    detail::CoxEval next;
    for (int h = 0; h < 60; ++h) {
      next = detail::cox_eval(time, event, x, beta + scale * step, order, true);
      if (next.loglik >= eval.loglik - 1e-12 && std::isfinite(next.loglik))
        break;
      scale *= 0.5;
    }
    beta += scale * step;
    eval = std::move(next);
    model.loglik_trace.push_back(eval.loglik);

    if (beta.lpNorm<Eigen::Infinity>() > opts.beta_bound)
      throw SeparationError(
          "cox: coefficients diverged (monotone likelihood); |beta| exceeded " +
          std::to_string(opts.beta_bound));
  }

  model.beta.assign(beta.data(), beta.data() + p);
  model.feature_means.assign(means.data(), means.data() + p);
  model.iterations = iter;
  model.gradient_max_norm = eval.gradient.lpNorm<Eigen::Infinity>();
  model.log_likelihood = eval.loglik;

  std::vector<double> scores(train.size());
  for (Eigen::Index i = 0; i < n; ++i)
    scores[static_cast<std::size_t>(i)] = x.row(i).dot(beta);
  model.baseline_cum_hazard = breslow_cumulative_hazard(time, event, scores);
  return model;
}

}  // namespace fleetlife
