#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fleetlife/rng.hpp"
#include "fleetlife/types.hpp"

namespace fleetlife {

namespace detail {

// Two-sample log-rank machinery over a pooled event-time grid.
// O - E of events in the "left" group, normalized by the hypergeometric
// variance estimate; returns 0 when the variance degenerates.
inline double log_rank_from_counts(const std::vector<int>& d,
                                   const std::vector<int>& r,
                                   const std::vector<int>& d1,
                                   const std::vector<int>& r1) {
  double observed_minus_expected = 0.0;
  double variance = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (r[k] <= 0) continue;
    const double frac = static_cast<double>(r1[k]) / r[k];
    observed_minus_expected += d1[k] - d[k] * frac;
    if (r[k] > 1) {
      variance += d[k] * frac * (1.0 - frac) *
                  (static_cast<double>(r[k] - d[k]) / (r[k] - 1));
    }
  }
  if (!(variance > 0.0)) return 0.0;
  return observed_minus_expected / std::sqrt(variance);
}

}  // namespace detail

// Standard two-sample log-rank statistic; positive when the left group fails
// more than expected. Antisymmetric under group swap.
inline double log_rank_statistic(std::span<const double> t_left,
                                 std::span<const int> e_left,
                                 std::span<const double> t_right,
                                 std::span<const int> e_right) {
  if (t_left.empty() || t_right.empty())
    throw DomainError("log_rank_statistic: empty group");
  if (t_left.size() != e_left.size() || t_right.size() != e_right.size())
    throw DomainError("log_rank_statistic: time/event length mismatch");

  std::vector<double> event_times;
  for (std::size_t i = 0; i < t_left.size(); ++i)
    if (e_left[i]) event_times.push_back(t_left[i]);
  for (std::size_t i = 0; i < t_right.size(); ++i)
    if (e_right[i]) event_times.push_back(t_right[i]);
  if (event_times.empty())
    throw DomainError("log_rank_statistic: no events in either group");
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()),
                    event_times.end());

  const std::size_t K = event_times.size();
  std::vector<int> d(K, 0), r(K, 0), d1(K, 0), r1(K, 0);
  auto tally = [&](std::span<const double> t, std::span<const int> e,
                   bool left) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      auto it = std::upper_bound(event_times.begin(), event_times.end(), t[i]);
      const auto pos = static_cast<std::size_t>(it - event_times.begin());
      for (std::size_t k = 0; k < pos; ++k) {
        ++r[k];
        if (left) ++r1[k];
      }
      if (e[i] && pos > 0 && event_times[pos - 1] == t[i]) {
        ++d[pos - 1];
        if (left) ++d1[pos - 1];
      }
    }
  };
  tally(t_left, e_left, true);
  tally(t_right, e_right, false);
  return detail::log_rank_from_counts(d, r, d1, r1);
}

inline double log_rank_statistic(const Dataset& left, const Dataset& right) {
  std::vector<double> tl, tr;
  std::vector<int> el, er;
  for (const auto& rec : left.records) {
    tl.push_back(rec.observed_time);
    el.push_back(rec.event);
  }
  for (const auto& rec : right.records) {
    tr.push_back(rec.observed_time);
    er.push_back(rec.event);
  }
  return log_rank_statistic(tl, el, tr, er);
}

// === survival tree (log-rank splits, Nelson-Aalen leaves) ===

struct SurvivalTreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf = -1;
};

struct SurvivalLeaf {
  StepFunction cum_hazard;  // in-bag Nelson-Aalen
  int n_subjects = 0;
  int n_events = 0;
};

struct SurvivalTree {
  std::vector<SurvivalTreeNode> nodes;
  std::vector<SurvivalLeaf> leaves;
  std::vector<std::size_t> in_bag;  // bootstrap slots; kept for diagnostics
  std::uint64_t seed = 0;

  const SurvivalLeaf& leaf_for(std::span<const double> x) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(node)];
      node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                   : n.right;
    }
    return leaves[static_cast<std::size_t>(
        nodes[static_cast<std::size_t>(node)].leaf)];
  }
};

struct SurvivalTreeParams {
  int mtry = 0;  // 0: ceil(sqrt(p))
  int min_leaf_size = 15;
  int min_leaf_events = 3;
};

namespace detail {

inline StepFunction nelson_aalen(const std::vector<double>& time,
                                 const std::vector<int>& event,
                                 std::span<const std::size_t> members) {
  std::vector<std::pair<double, int>> obs;
  obs.reserve(members.size());
  for (auto m : members) obs.emplace_back(time[m], event[m]);
  std::sort(obs.begin(), obs.end());
  StepFunction na;
  double acc = 0.0;
  std::size_t i = 0, at_risk = obs.size();
  while (i < obs.size()) {
    const double t = obs[i].first;
    int deaths = 0;
    std::size_t group = 0;
    while (i + group < obs.size() && obs[i + group].first == t) {
      deaths += obs[i + group].second;
      ++group;
    }
    if (deaths > 0) {
      acc += static_cast<double>(deaths) / static_cast<double>(at_risk);
      na.times.push_back(t);
      na.values.push_back(acc);
    }
    at_risk -= group;
    i += group;
  }
  return na;
}

class SurvivalTreeGrower {
 public:
  SurvivalTreeGrower(const Dataset& data, const std::vector<double>& time,
                     const std::vector<int>& event,
                     const SurvivalTreeParams& params, Rng& rng)
      : data_(data), time_(time), event_(event), params_(params), rng_(rng) {}

  SurvivalTree grow(std::vector<std::size_t> members) {
    SurvivalTree tree;
    tree.in_bag = members;
    build(tree, std::move(members));
    return tree;
  }

 private:
  int build(SurvivalTree& tree, std::vector<std::size_t> members) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    int events = 0;
    for (auto m : members) events += event_[m];
    const bool splittable =
        static_cast<int>(members.size()) >= 2 * params_.min_leaf_size &&
        events >= 2 * params_.min_leaf_events && events > 0;

    int best_feature = -1;
    double best_threshold = 0.0, best_stat = 0.0;
    if (splittable) find_best_split(members, best_feature, best_threshold,
                                    best_stat);

    if (best_feature < 0) {
      SurvivalLeaf leaf;
      leaf.cum_hazard = nelson_aalen(time_, event_, members);
      leaf.n_subjects = static_cast<int>(members.size());
      leaf.n_events = events;
      tree.nodes[static_cast<std::size_t>(node_id)].leaf =
          static_cast<int>(tree.leaves.size());
      tree.leaves.push_back(std::move(leaf));
      return node_id;
    }

    std::vector<std::size_t> left, right;
    for (auto m : members) {
      const double v =
          data_.records[m].features[static_cast<std::size_t>(best_feature)];
      (v <= best_threshold ? left : right).push_back(m);
    }
    members.clear();
    members.shrink_to_fit();

    const int left_id = build(tree, std::move(left));
    const int right_id = build(tree, std::move(right));
    auto& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = right_id;
    return node_id;
  }

  // Exact search: candidate thresholds are midpoints between consecutive
  // distinct in-node values of each tried feature; the winning split
  // maximizes |log-rank| subject to the leaf constraints.
  void find_best_split(const std::vector<std::size_t>& members,
                       int& best_feature, double& best_threshold,
                       double& best_stat) {
    const std::size_t p = data_.feature_names.size();
    const int mtry = params_.mtry > 0
                         ? std::min<int>(params_.mtry, static_cast<int>(p))
                         : static_cast<int>(
                               std::ceil(std::sqrt(static_cast<double>(p))));
    const auto tried = rng_.choose(p, static_cast<std::size_t>(mtry));

    // Node-level event grid and totals.
    std::vector<double> taus;
    for (auto m : members)
      if (event_[m]) taus.push_back(time_[m]);
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    const std::size_t K = taus.size();
    if (K == 0) return;

    auto time_pos = [&](double t) {  // count of taus <= t
      return static_cast<std::size_t>(
          std::upper_bound(taus.begin(), taus.end(), t) - taus.begin());
    };

    std::vector<int> d(K, 0), r(K, 0);
    std::vector<std::size_t> pos(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
      const auto m = members[i];
      pos[i] = time_pos(time_[m]);
      for (std::size_t k = 0; k < pos[i]; ++k) ++r[k];
      if (event_[m] && pos[i] > 0 && taus[pos[i] - 1] == time_[m])
        ++d[pos[i] - 1];
    }

    std::vector<std::size_t> order(members.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    int total_events = 0;
    for (auto m : members) total_events += event_[m];

    for (std::size_t tf : tried) {
      const int f = static_cast<int>(tf);
      auto value = [&](std::size_t i) {
        return data_.records[members[i]]
            .features[static_cast<std::size_t>(f)];
      };
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return value(a) < value(b);
      });

      std::vector<int> d1(K, 0), r1(K, 0);
      int left_n = 0, left_events = 0;

      std::size_t i = 0;
      while (i < order.size()) {
        const double v = value(order[i]);
        // move the whole tied-value block into the left group
        while (i < order.size() && value(order[i]) == v) {
          const std::size_t idx = order[i];
          const auto m = members[idx];
          for (std::size_t k = 0; k < pos[idx]; ++k) ++r1[k];
          if (event_[m] && pos[idx] > 0 && taus[pos[idx] - 1] == time_[m])
            ++d1[pos[idx] - 1];
          ++left_n;
          left_events += event_[m];
          ++i;
        }
        if (i == order.size()) break;  // no right group left

        const int right_n = static_cast<int>(members.size()) - left_n;
        const int right_events = total_events - left_events;
        if (left_n < params_.min_leaf_size || right_n < params_.min_leaf_size ||
            left_events < params_.min_leaf_events ||
            right_events < params_.min_leaf_events)
          continue;

        const double stat =
            std::abs(detail::log_rank_from_counts(d, r, d1, r1));
        if (stat > best_stat) {
          best_stat = stat;
          best_feature = f;
          best_threshold = 0.5 * (v + value(order[i]));
        }
      }
    }
  }

  const Dataset& data_;
  const std::vector<double>& time_;
  const std::vector<int>& event_;
  const SurvivalTreeParams& params_;
  Rng& rng_;
};

}  // namespace detail

// === least-squares regression tree (boosting base learner) ===

struct RegressionTreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<RegressionTreeNode> nodes;

  double predict(std::span<const double> x) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(node)];
      node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                   : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
  }
};

namespace detail {

class RegressionTreeGrower {
 public:
  RegressionTreeGrower(const Dataset& data, const std::vector<double>& target,
                       int max_depth, int min_leaf_size)
      : data_(data),
        target_(target),
        max_depth_(max_depth),
        min_leaf_size_(min_leaf_size) {}

  RegressionTree grow(std::vector<std::size_t> members) {
    RegressionTree tree;
    build(tree, std::move(members), 0);
    return tree;
  }

 private:
  int build(RegressionTree& tree, std::vector<std::size_t> members,
            int depth) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    double sum = 0.0;
    for (auto m : members) sum += target_[m];
    const double mean = sum / static_cast<double>(members.size());

    int best_feature = -1;
    double best_threshold = 0.0;
    if (depth < max_depth_ &&
        static_cast<int>(members.size()) >= 2 * min_leaf_size_)
      find_best_split(members, sum, best_feature, best_threshold);

    if (best_feature < 0) {
      tree.nodes[static_cast<std::size_t>(node_id)].value = mean;
      return node_id;
    }

    std::vector<std::size_t> left, right;
    for (auto m : members) {
      const double v =
          data_.records[m].features[static_cast<std::size_t>(best_feature)];
      (v <= best_threshold ? left : right).push_back(m);
    }
    members.clear();
    members.shrink_to_fit();

    const int left_id = build(tree, std::move(left), depth + 1);
    const int right_id = build(tree, std::move(right), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = right_id;
    return node_id;
  }

  void find_best_split(const std::vector<std::size_t>& members, double sum,
                       int& best_feature, double& best_threshold) {
    const auto n = members.size();
    const double base = sum * sum / static_cast<double>(n);
    double best_gain = 1e-12;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t f = 0; f < data_.feature_names.size(); ++f) {
      auto value = [&](std::size_t i) {
        return data_.records[members[i]].features[f];
      };
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return value(a) < value(b);
      });
      double left_sum = 0.0;
      std::size_t left_n = 0;
      std::size_t i = 0;
      while (i < n) {
        const double v = value(order[i]);
        while (i < n && value(order[i]) == v) {
          left_sum += target_[members[order[i]]];
          ++left_n;
          ++i;
        }
        if (i == n) break;
        if (left_n < static_cast<std::size_t>(min_leaf_size_) ||
            n - left_n < static_cast<std::size_t>(min_leaf_size_))
          continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(left_n) +
                            right_sum * right_sum /
                                static_cast<double>(n - left_n) -
                            base;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (v + value(order[i]));
        }
      }
    }
  }

  const Dataset& data_;
  const std::vector<double>& target_;
  int max_depth_;
  int min_leaf_size_;
};

}  // namespace detail

}  // namespace fleetlife
