#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "fleetlife/dates.hpp"
#include "fleetlife/errors.hpp"

namespace fleetlife {

// One subject: covariates, observed operational time, event flag, and the
// calendar anchors needed for cleaning and window restriction.
struct SurvivalRecord {
  std::string id;
  std::vector<double> features;
  double observed_time = 0.0;  // operational hours at resolution
  int event = 0;               // 1 = failure observed, 0 = censored
  Date production_date{};
  Date install_date{};
  Date last_log_date{};
};

// Immutable after construction; operations return new datasets.
struct Dataset {
  std::vector<SurvivalRecord> records;
  std::vector<std::string> feature_names;
  std::vector<int> dropped_rows;  // 1-based data rows dropped during load

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  int n_events() const {
    int n = 0;
    for (const auto& r : records) n += r.event;
    return n;
  }

  double censoring_rate() const {
    if (records.empty()) return 0.0;
    return static_cast<double>(size() - static_cast<std::size_t>(n_events())) /
           static_cast<double>(size());
  }

  std::optional<std::size_t> feature_index(std::string_view name) const {
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
      if (feature_names[j] == name) return j;
    }
    return std::nullopt;
  }

  std::vector<double> feature_column(std::size_t j) const {
    std::vector<double> col;
    col.reserve(records.size());
    for (const auto& r : records) col.push_back(r.features.at(j));
    return col;
  }

  // Names of features constant across all records.
  std::vector<std::string> constant_features() const {
    std::vector<std::string> out;
    if (records.empty()) return out;
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
      const double v0 = records.front().features[j];
      bool constant = true;
      for (const auto& r : records) {
        if (r.features[j] != v0) {
          constant = false;
          break;
        }
      }
      if (constant) out.push_back(feature_names[j]);
    }
    return out;
  }

  // New dataset keeping only the named feature columns, in the given order.
  Dataset with_features(const std::vector<std::string>& keep) const {
    Dataset out;
    out.feature_names = keep;
    out.dropped_rows = dropped_rows;
    std::vector<std::size_t> idx;
    idx.reserve(keep.size());
    for (const auto& name : keep) {
      auto j = feature_index(name);
      if (!j) throw DomainError("unknown feature \"" + name + "\"");
      idx.push_back(*j);
    }
    out.records.reserve(records.size());
    for (const auto& r : records) {
      SurvivalRecord nr = r;
      nr.features.clear();
      nr.features.reserve(idx.size());
      for (auto j : idx) nr.features.push_back(r.features[j]);
      out.records.push_back(std::move(nr));
    }
    return out;
  }

  void validate() const {
    std::unordered_set<std::string_view> ids;
    ids.reserve(records.size());
    for (const auto& r : records) {
      if (r.id.empty()) throw DomainError("record with empty id");
      if (!ids.insert(r.id).second)
        throw DomainError("duplicate record id \"" + r.id + "\"");
      if (!(r.observed_time >= 0.0) || !std::isfinite(r.observed_time))
        throw DomainError("record " + r.id + ": observed_time must be >= 0");
      if (r.event != 0 && r.event != 1)
        throw DomainError("record " + r.id + ": event must be 0 or 1");
      if (r.install_date < r.production_date)
        throw DomainError("record " + r.id + ": install before production");
      if (r.last_log_date < r.install_date)
        throw DomainError("record " + r.id + ": last log before install");
      if (r.features.size() != feature_names.size())
        throw DomainError("record " + r.id + ": feature width mismatch");
      for (double v : r.features) {
        if (!std::isfinite(v))
          throw DomainError("record " + r.id + ": non-finite feature value");
      }
    }
  }
};

// Right-continuous step function; value_at(t) = values[k] for
// times[k] <= t < times[k+1], and `before_first` left of the first step.
struct StepFunction {
  std::vector<double> times;
  std::vector<double> values;

  double value_at(double t, double before_first) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return before_first;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
  }
};

// Survival step function S(t) on [0, inf): S(t) = 1 for t < times[0],
// probs[k] on [times[k], times[k+1]), probs.back() afterwards. The stored
// curve is the right-continuous version; Pr(T >= t) differs from it only at
// the step points themselves.
struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> probs;

  double value_at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return probs[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  // Left limit S(t-); equals Pr(T >= t) for curves stepping at event times.
  double value_before(double t) const {
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return probs[static_cast<std::size_t>(it - times.begin()) - 1];
  }

  void validate() const {
    if (times.size() != probs.size())
      throw DomainError("survival curve: times/probs length mismatch");
    for (std::size_t k = 0; k < times.size(); ++k) {
      if (!std::isfinite(times[k]) || times[k] < 0.0)
        throw DomainError("survival curve: times must be non-negative");
      if (k > 0 && !(times[k] > times[k - 1]))
        throw DomainError("survival curve: times must be strictly increasing");
      if (!(probs[k] >= 0.0 && probs[k] <= 1.0))
        throw DomainError("survival curve: probabilities outside [0,1]");
      if (k > 0 && probs[k] > probs[k - 1] + 1e-12)
        throw DomainError("survival curve: probabilities must be non-increasing");
    }
  }
};

struct PredictionWindow {
  Date t0{};  // train cutoff
  Date t1{};  // forecast horizon

  void validate() const {
    if (!(t0 < t1)) throw DomainError("prediction window requires t0 < t1");
  }
};

// Rolling sweep: t0 advances by step_months, each t1 = t0 + horizon_months.
inline std::vector<PredictionWindow> make_windows(Date first_t0, int count,
                                                  int step_months,
                                                  int horizon_months) {
  if (count < 1 || step_months < 1 || horizon_months < 1)
    throw ParameterError("make_windows: counts and spans must be positive");
  std::vector<PredictionWindow> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const Date t0 = add_months(first_t0, k * step_months);
    out.push_back(PredictionWindow{t0, add_months(t0, horizon_months)});
  }
  return out;
}

// Reorders a feature vector expressed over `from` onto the layout `to`.
inline std::vector<double> project_features(
    std::span<const double> x, const std::vector<std::string>& from,
    const std::vector<std::string>& to) {
  if (x.size() != from.size())
    throw DomainError("project_features: vector/name width mismatch");
  std::vector<double> out;
  out.reserve(to.size());
  for (const auto& name : to) {
    auto it = std::find(from.begin(), from.end(), name);
    if (it == from.end())
      throw DomainError("project_features: missing feature \"" + name + "\"");
    out.push_back(x[static_cast<std::size_t>(it - from.begin())]);
  }
  return out;
}

}  // namespace fleetlife
