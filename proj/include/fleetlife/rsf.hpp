#pragma once

#include <atomic>
#include <cmath>
#include <span>
#include <thread>
#include <vector>

#include "fleetlife/rng.hpp"
#include "fleetlife/trees.hpp"
#include "fleetlife/types.hpp"

namespace fleetlife {

struct RsfParams {
  int n_trees = 200;
  int mtry = 0;  // 0: ceil(sqrt(p))
  int min_leaf_size = 15;
  int min_leaf_events = 3;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Random survival forest: bootstrap trees split on |log-rank|, leaves hold
// in-bag Nelson-Aalen cumulative hazards, predictions average hazards over
// the pooled training event-time grid.
struct RsfModel {
  std::vector<SurvivalTree> trees;
  std::vector<double> grid;  // distinct training event times, ascending
  std::vector<std::string> feature_names;
  RsfParams params;

  void check_dim(std::span<const double> x) const {
    if (x.size() != feature_names.size())
      throw DomainError("rsf predict: expected " +
                        std::to_string(feature_names.size()) +
                        " features, got " + std::to_string(x.size()));
  }

  // Mean cumulative hazard across trees, one value per grid point.
  std::vector<double> cumulative_hazard(std::span<const double> x) const {
    check_dim(x);
    std::vector<double> h(grid.size(), 0.0);
    for (const auto& tree : trees) {
      const auto& leaf = tree.leaf_for(x);
      for (std::size_t k = 0; k < grid.size(); ++k)
        h[k] += leaf.cum_hazard.value_at(grid[k], 0.0);
    }
    for (auto& v : h) v /= static_cast<double>(trees.size());
    return h;
  }

  double risk_score(std::span<const double> x) const {
    const auto h = cumulative_hazard(x);
    double sum = 0.0;
    for (double v : h) sum += v;
    return sum;
  }

  SurvivalCurve predict_survival(std::span<const double> x) const {
    const auto h = cumulative_hazard(x);
    SurvivalCurve curve;
    curve.times = grid;
    curve.probs.reserve(h.size());
    for (double v : h) curve.probs.push_back(std::exp(-v));
    return curve;
  }
};

inline RsfModel fit_rsf(const Dataset& train, const RsfParams& params = {}) {
  if (train.empty()) throw EmptyInputError("rsf: empty dataset");
  const int total_events = train.n_events();
  if (total_events < 1) throw InsufficientDataError("rsf: needs an event");
  if (params.n_trees < 1) throw ParameterError("rsf: n_trees must be >= 1");
  if (params.min_leaf_size < 1)
    throw ParameterError("rsf: min_leaf_size must be >= 1");
  if (params.min_leaf_events < 1)
    throw ParameterError("rsf: min_leaf_events must be >= 1");
  if (params.min_leaf_events > total_events)
    throw ParameterError("rsf: min_leaf_events exceeds total events (" +
                         std::to_string(total_events) + "); unfittable");
  const auto p = train.feature_names.size();
  if (params.mtry < 0 || params.mtry > static_cast<int>(p))
    throw ParameterError("rsf: mtry out of range");

  std::vector<double> time(train.size());
  std::vector<int> event(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    time[i] = train.records[i].observed_time;
    event[i] = train.records[i].event;
  }

  RsfModel model;
  model.feature_names = train.feature_names;
  model.params = params;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (event[i]) model.grid.push_back(time[i]);
  std::sort(model.grid.begin(), model.grid.end());
  model.grid.erase(std::unique(model.grid.begin(), model.grid.end()),
                   model.grid.end());

  SurvivalTreeParams tree_params;
  tree_params.mtry = params.mtry;
  tree_params.min_leaf_size = params.min_leaf_size;
  tree_params.min_leaf_events = params.min_leaf_events;

  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  // Each tree owns a seed derived from (seed, index), so results do not
  // depend on the thread schedule.
  auto build_tree = [&](std::size_t t) {
    Rng rng(mix_seed(params.seed, t));
    auto members = rng.bootstrap(train.size());
    detail::SurvivalTreeGrower grower(train, time, event, tree_params, rng);
    SurvivalTree tree = grower.grow(std::move(members));
    tree.seed = mix_seed(params.seed, t);
    model.trees[t] = std::move(tree);
  };

  const int threads = std::max(1, std::min(params.threads, params.n_trees));
  if (threads == 1) {
    for (std::size_t t = 0; t < model.trees.size(); ++t) build_tree(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t = next.fetch_add(1); t < model.trees.size();
             t = next.fetch_add(1))
          build_tree(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  return model;
}

inline SurvivalCurve predict_rsf_survival(const RsfModel& m,
                                          std::span<const double> x) {
  return m.predict_survival(x);
}

}  // namespace fleetlife
