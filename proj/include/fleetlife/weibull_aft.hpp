#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fleetlife/types.hpp"

namespace fleetlife {

namespace detail {

struct AftEval {
  double loglik = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd gradient;  // d/d(beta..., log sigma)
  Eigen::MatrixXd fisher;    // negated Hessian
};

// Censored log likelihood of ln T = x*beta + sigma*eps with Gumbel-minimum
// eps, parametrized over (beta, log sigma). Events at time zero are rejected
// upstream; censored zeros contribute nothing. Accumulation runs in extended
// precision so the gradient at the optimum sits well below the 1e-8
// convergence tolerance even on large fleets.
inline AftEval aft_eval(const Eigen::MatrixXd& design,
                        const std::vector<double>& time,
                        const std::vector<int>& event,
                        const Eigen::VectorXd& theta, bool want_derivatives) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  AftEval out;
  if (want_derivatives) {
    out.gradient = Eigen::VectorXd::Zero(p + 1);
    out.fisher = Eigen::MatrixXd::Zero(p + 1, p + 1);
  }
  const double log_sigma = theta[p];
  if (std::abs(log_sigma) > 40.0) return out;  // off the optimizable range
  const double sigma = std::exp(log_sigma);
  const Eigen::VectorXd lp = design * theta.head(p);

  long double ll = 0.0;
  std::vector<long double> g(static_cast<std::size_t>(p) + 1, 0.0L);
  std::vector<long double> f((static_cast<std::size_t>(p) + 1) *
                                 (static_cast<std::size_t>(p) + 1),
                             0.0L);
  const auto pp = static_cast<std::size_t>(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = time[static_cast<std::size_t>(i)];
    const int d = event[static_cast<std::size_t>(i)];
    if (y <= 0.0) continue;  // censored at zero exposure carries no information
    const double z = (std::log(y) - lp[i]) / sigma;
    const double w = std::exp(z);
    if (!std::isfinite(w)) return out;
    ll += d * (z - log_sigma - std::log(y)) - w;
    if (want_derivatives) {
      const double g_common = (w - d) / sigma;
      const double f_common = w / (sigma * sigma);
      const double cross = (w * z + w - d) / sigma;
      for (std::size_t a = 0; a < pp; ++a) {
        const double xa = design(i, static_cast<Eigen::Index>(a));
        g[a] += g_common * xa;
        for (std::size_t b = a; b < pp; ++b)
          f[a * (pp + 1) + b] +=
              f_common * xa * design(i, static_cast<Eigen::Index>(b));
        // fisher = -Hessian; cross block -H_bu = (w*z + w - d) * x / sigma
        f[a * (pp + 1) + pp] += cross * xa;
      }
      g[pp] += (w - d) * z - d;
      f[pp * (pp + 1) + pp] += w * z * z + (w - d) * z;
    }
  }
  if (!std::isfinite(static_cast<double>(ll))) return out;
  out.loglik = static_cast<double>(ll);
  if (want_derivatives) {
    for (std::size_t a = 0; a <= pp; ++a) {
      out.gradient[static_cast<Eigen::Index>(a)] = static_cast<double>(g[a]);
      for (std::size_t b = a; b <= pp; ++b) {
        const double v = static_cast<double>(f[a * (pp + 1) + b]);
        out.fisher(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
        out.fisher(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
      }
    }
  }
  return out;
}

}  // namespace detail

struct AftOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  int curve_grid_points = 200;
};

struct WeibullAftModel {
  std::vector<std::string> feature_names;
  std::vector<double> beta;  // [intercept, one per feature]
  double sigma = 1.0;
  double log_likelihood = 0.0;
  int iterations = 0;
  double gradient_max_norm = 0.0;
  double max_train_time = 0.0;
  int curve_grid_points = 200;

  double linear_predictor(std::span<const double> x) const {
    if (x.size() + 1 != beta.size())
      throw DomainError("aft predict: expected " +
                        std::to_string(beta.size() - 1) + " features, got " +
                        std::to_string(x.size()));
    double lp = beta[0];
    for (std::size_t k = 0; k < x.size(); ++k) lp += x[k] * beta[k + 1];
    return lp;
  }

  // Closed form S(t|x) = exp(-(t / exp(x*beta))^(1/sigma)).
  double survival(std::span<const double> x, double t) const {
    if (t < 0.0) throw DomainError("aft survival: negative time");
    if (t == 0.0) return 1.0;
    const double z = (std::log(t) - linear_predictor(x)) / sigma;
    return std::exp(-std::exp(z));
  }

  double median_survival_time(std::span<const double> x) const {
    return std::exp(linear_predictor(x)) * std::pow(std::log(2.0), sigma);
  }

  // Log-spaced sampling of the closed form; Weibull curves move fastest at
  // small t. The grid reaches max(train max time, t_hint).
  SurvivalCurve predict_survival(std::span<const double> x,
                                 double t_hint = 0.0) const {
    const double hi = std::max({max_train_time, t_hint, 1e-9});
    const double lo = hi * 1e-4;
    const int m = std::max(curve_grid_points, 2);
    SurvivalCurve curve;
    curve.times.reserve(static_cast<std::size_t>(m));
    curve.probs.reserve(static_cast<std::size_t>(m));
    const double step = (std::log(hi) - std::log(lo)) / (m - 1);
    double prev = 2.0;
    for (int k = 0; k < m; ++k) {
      const double t = std::exp(std::log(lo) + step * k);
      const double s = survival(x, t);
      if (curve.times.empty() || t > curve.times.back()) {
        curve.times.push_back(t);
        curve.probs.push_back(std::min(s, prev));
        prev = curve.probs.back();
      }
    }
    return curve;
  }
};

inline SurvivalCurve predict_aft_survival(const WeibullAftModel& m,
                                          std::span<const double> x,
                                          double t_hint = 0.0) {
  return m.predict_survival(x, t_hint);
}

// Exposed for oracle tests: log likelihood and its gradient at
// (beta including intercept, log sigma).
inline double aft_log_likelihood(const Dataset& train,
                                 std::span<const double> beta_with_intercept,
                                 double log_sigma) {
  const auto n = static_cast<Eigen::Index>(train.size());
  const auto p = static_cast<Eigen::Index>(train.feature_names.size()) + 1;
  if (static_cast<Eigen::Index>(beta_with_intercept.size()) != p)
    throw DomainError("aft loglik: beta width mismatch");
  Eigen::MatrixXd design(n, p);
  std::vector<double> time(train.size());
  std::vector<int> event(train.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = train.records[static_cast<std::size_t>(i)];
    design(i, 0) = 1.0;
    for (Eigen::Index k = 1; k < p; ++k)
      design(i, k) = r.features[static_cast<std::size_t>(k - 1)];
    time[static_cast<std::size_t>(i)] = r.observed_time;
    event[static_cast<std::size_t>(i)] = r.event;
  }
  Eigen::VectorXd theta(p + 1);
  for (Eigen::Index k = 0; k < p; ++k)
    theta[k] = beta_with_intercept[static_cast<std::size_t>(k)];
  theta[p] = log_sigma;
  return detail::aft_eval(design, time, event, theta, false).loglik;
}

inline std::vector<double> aft_log_likelihood_gradient(
    const Dataset& train, std::span<const double> beta_with_intercept,
    double log_sigma) {
  const auto n = static_cast<Eigen::Index>(train.size());
  const auto p = static_cast<Eigen::Index>(train.feature_names.size()) + 1;
  if (static_cast<Eigen::Index>(beta_with_intercept.size()) != p)
    throw DomainError("aft gradient: beta width mismatch");
  Eigen::MatrixXd design(n, p);
  std::vector<double> time(train.size());
  std::vector<int> event(train.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = train.records[static_cast<std::size_t>(i)];
    design(i, 0) = 1.0;
    for (Eigen::Index k = 1; k < p; ++k)
      design(i, k) = r.features[static_cast<std::size_t>(k - 1)];
    time[static_cast<std::size_t>(i)] = r.observed_time;
    event[static_cast<std::size_t>(i)] = r.event;
  }
  Eigen::VectorXd theta(p + 1);
  for (Eigen::Index k = 0; k < p; ++k)
    theta[k] = beta_with_intercept[static_cast<std::size_t>(k)];
  theta[p] = log_sigma;
  const auto eval = detail::aft_eval(design, time, event, theta, true);
  return {eval.gradient.data(), eval.gradient.data() + eval.gradient.size()};
}

// Maximum likelihood over (beta, log sigma); damped Newton with
// step-halving, started from the event-only moments of ln t.
inline WeibullAftModel fit_weibull_aft(const Dataset& train,
                                       const AftOptions& opts = {}) {
  if (train.empty()) throw EmptyInputError("aft: empty dataset");
  std::set<double> distinct_event_times;
  for (const auto& r : train.records) {
    if (r.event == 1) {
      if (r.observed_time <= 0.0)
        throw DomainError("aft: record " + r.id + " has an event at time 0");
      distinct_event_times.insert(r.observed_time);
    }
  }
  if (distinct_event_times.size() < 2)
    throw InsufficientDataError("aft: needs at least two distinct event times");

  const auto n = static_cast<Eigen::Index>(train.size());
  const auto p = static_cast<Eigen::Index>(train.feature_names.size()) + 1;
  Eigen::MatrixXd design(n, p);
  std::vector<double> time(train.size());
  std::vector<int> event(train.size());
  double max_time = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = train.records[static_cast<std::size_t>(i)];
    design(i, 0) = 1.0;
    for (Eigen::Index k = 1; k < p; ++k)
      design(i, k) = r.features[static_cast<std::size_t>(k - 1)];
    time[static_cast<std::size_t>(i)] = r.observed_time;
    event[static_cast<std::size_t>(i)] = r.event;
    max_time = std::max(max_time, r.observed_time);
  }

  // Center covariates for conditioning; the intercept shifts back afterward
  // and the slope estimates are unchanged.
  Eigen::VectorXd means = Eigen::VectorXd::Zero(p);
  for (Eigen::Index k = 1; k < p; ++k) {
    means[k] = design.col(k).mean();
    design.col(k).array() -= means[k];
  }

  double mean_log = 0.0, sq_log = 0.0;
  int n_events = 0;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (event[i]) {
      mean_log += std::log(time[i]);
      sq_log += std::log(time[i]) * std::log(time[i]);
      ++n_events;
    }
  }
  mean_log /= n_events;
  const double var_log = std::max(sq_log / n_events - mean_log * mean_log, 1e-4);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
  theta[0] = mean_log;
  theta[p] = 0.5 * std::log(var_log);

  auto eval = detail::aft_eval(design, time, event, theta, true);
  int iter = 0;
  // The likelihood is not globally concave in (beta, log sigma); a Levenberg
  // diagonal bump blends the Newton step toward gradient ascent until the
  // candidate improves, which cannot stall off a stationary point.
  while (iter < opts.max_iterations &&
         eval.gradient.lpNorm<Eigen::Infinity>() >= opts.gradient_tolerance) {
    ++iter;
    const double diag_scale = std::max(1.0, eval.fisher.diagonal().maxCoeff());
    double lambda = 0.0;
    bool accepted = false;
    for (int tries = 0; tries < 80 && !accepted; ++tries) {
      Eigen::MatrixXd h = eval.fisher;
      if (lambda > 0.0) h.diagonal().array() += lambda;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd step = ldlt.solve(eval.gradient);
        if (step.allFinite()) {
          auto next = detail::aft_eval(design, time, event, theta + step, true);
          if (std::isfinite(next.loglik) &&
              next.loglik >= eval.loglik - 1e-12) {
            theta += step;
            eval = std::move(next);
            accepted = true;
          }
        }
      }
      if (!accepted)
        lambda = lambda == 0.0 ? 1e-8 * diag_scale : lambda * 10.0;
    }
    if (!accepted) break;  // reported through the convergence check below
  }

  if (eval.gradient.lpNorm<Eigen::Infinity>() >= opts.gradient_tolerance) {
    std::ostringstream msg;
    msg << "aft: no convergence after " << iter
        << " iterations; last iterate beta = [";
    for (Eigen::Index k = 0; k < p; ++k) {
      if (k) msg << ", ";
      msg << theta[k];
    }
    msg << "], sigma = " << std::exp(theta[p]) << ", gradient max-norm = "
        << eval.gradient.lpNorm<Eigen::Infinity>();
    throw ConvergenceError(msg.str());
  }

  WeibullAftModel model;
  model.feature_names = train.feature_names;
  model.beta.assign(theta.data(), theta.data() + p);
  for (Eigen::Index k = 1; k < p; ++k)
    model.beta[0] -= means[k] * model.beta[static_cast<std::size_t>(k)];
  model.sigma = std::exp(theta[p]);
  model.log_likelihood = eval.loglik;
  model.iterations = iter;
  model.gradient_max_norm = eval.gradient.lpNorm<Eigen::Infinity>();
  model.max_train_time = max_time;
  model.curve_grid_points = opts.curve_grid_points;
  return model;
}

}  // namespace fleetlife
