#pragma once

// Shared builders and independent oracles for the test suites. Everything
// here stays independent of the library's fitting paths: oracles recompute
// expected values from first principles.

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fleetlife/dataset.hpp"
#include "fleetlife/types.hpp"

namespace testsupport {

using fleetlife::Dataset;
using fleetlife::Date;
using fleetlife::SurvivalRecord;

inline Date default_production() { return fleetlife::make_date(2019, 6, 1); }
inline Date default_install() { return fleetlife::make_date(2019, 9, 1); }

inline SurvivalRecord make_record(const std::string& id, double time,
                                  int event,
                                  std::vector<double> features = {}) {
  SurvivalRecord r;
  r.id = id;
  r.features = std::move(features);
  r.observed_time = time;
  r.event = event;
  r.production_date = default_production();
  r.install_date = default_install();
  r.last_log_date = fleetlife::add_days(
      default_install(), std::max(1, static_cast<int>(time / 8.0) + 1));
  return r;
}

// Dataset from (time, event) pairs, optionally with one feature column.
inline Dataset make_dataset(const std::vector<std::pair<double, int>>& obs,
                            const std::vector<double>& feature = {}) {
  Dataset ds;
  if (!feature.empty()) ds.feature_names = {"x"};
  for (std::size_t i = 0; i < obs.size(); ++i) {
    auto rec = make_record("s" + std::to_string(i), obs[i].first,
                           obs[i].second);
    if (!feature.empty()) rec.features = {feature[i]};
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

// Unique scratch directory under the build tree, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("fleetlife_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Brute-force product-limit estimator: for each distinct event time compute
// the risk set and event count by full scans.
inline fleetlife::SurvivalCurve kaplan_meier_oracle(
    const std::vector<std::pair<double, int>>& obs) {
  std::vector<double> event_times;
  for (const auto& [t, e] : obs)
    if (e) event_times.push_back(t);
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()),
                    event_times.end());
  fleetlife::SurvivalCurve curve;
  double s = 1.0;
  for (double t : event_times) {
    int at_risk = 0, deaths = 0;
    for (const auto& [y, e] : obs) {
      if (y >= t) ++at_risk;
      if (e && y == t) ++deaths;
    }
    s *= 1.0 - static_cast<double>(deaths) / at_risk;
    curve.times.push_back(t);
    curve.probs.push_back(s);
  }
  return curve;
}

// Exhaustive weighted isotonic fit: enumerate consecutive-block partitions
// of the p-sorted sequence, keep those with non-decreasing block means, and
// take the weighted-SSE minimizer.
struct IsoPoint {
  double p;
  int y;
  double w;
};

inline std::vector<double> isotonic_oracle(std::vector<IsoPoint> pts) {
  std::stable_sort(pts.begin(), pts.end(), [](const IsoPoint& a,
                                              const IsoPoint& b) {
    if (a.p != b.p) return a.p < b.p;
    return a.y > b.y;
  });
  const std::size_t n = pts.size();
  std::vector<double> best;
  double best_sse = 0.0;
  bool found = false;
  const unsigned long long masks = 1ull << (n - 1);
  for (unsigned long long mask = 0; mask < masks; ++mask) {
    // bit k set: block boundary between k and k+1
    std::vector<double> fit(n);
    double prev_mean = -1.0;
    bool feasible = true;
    double sse = 0.0;
    std::size_t start = 0;
    for (std::size_t k = 0; k <= n - 1; ++k) {
      const bool boundary = k == n - 1 || (mask >> k) & 1ull;
      if (!boundary) continue;
      double sw = 0.0, swy = 0.0;
      for (std::size_t i = start; i <= k; ++i) {
        sw += pts[i].w;
        swy += pts[i].w * pts[i].y;
      }
      const double mean = swy / sw;
      if (mean < prev_mean - 1e-12) {
        feasible = false;
        break;
      }
      for (std::size_t i = start; i <= k; ++i) {
        fit[i] = mean;
        sse += pts[i].w * (pts[i].y - mean) * (pts[i].y - mean);
      }
      prev_mean = mean;
      start = k + 1;
    }
    if (!feasible) continue;
    if (!found || sse < best_sse - 1e-15) {
      found = true;
      best_sse = sse;
      best = fit;
    }
  }
  return best;
}

// Weibull AFT sample with fixed Type-I censoring, bypassing the library RNG.
inline Dataset aft_sample(std::mt19937_64& gen, std::size_t n,
                          double intercept, const std::vector<double>& slopes,
                          double sigma, double censor_quantile) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset ds;
  for (std::size_t k = 0; k < slopes.size(); ++k)
    ds.feature_names.push_back("x" + std::to_string(k));
  std::vector<double> lifetimes(n);
  std::vector<std::vector<double>> xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lp = intercept;
    xs[i].resize(slopes.size());
    for (std::size_t k = 0; k < slopes.size(); ++k) {
      xs[i][k] = 2.0 * unif(gen) - 1.0;
      lp += slopes[k] * xs[i][k];
    }
    const double eps = std::log(-std::log(1.0 - unif(gen)));
    lifetimes[i] = std::exp(lp + sigma * eps);
  }
  std::vector<double> sorted = lifetimes;
  std::sort(sorted.begin(), sorted.end());
  const double cutoff =
      sorted[static_cast<std::size_t>(censor_quantile * (n - 1))];
  for (std::size_t i = 0; i < n; ++i) {
    const bool censored = lifetimes[i] > cutoff;
    auto rec = make_record("s" + std::to_string(i),
                           censored ? cutoff : lifetimes[i], censored ? 0 : 1);
    rec.features = xs[i];
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace testsupport
