#pragma once

#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fleetlife/cox.hpp"
#include "fleetlife/gb_cox.hpp"
#include "fleetlife/isotonic.hpp"
#include "fleetlife/kaplan_meier.hpp"
#include "fleetlife/rsf.hpp"
#include "fleetlife/types.hpp"
#include "fleetlife/weibull_aft.hpp"

namespace fleetlife {

enum class ModelKind { kaplan_meier, cox, gb_cox, rsf, weibull_aft };

inline std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kaplan_meier: return "km";
    case ModelKind::cox: return "cox";
    case ModelKind::gb_cox: return "gbcox";
    case ModelKind::rsf: return "rsf";
    case ModelKind::weibull_aft: return "aft";
  }
  throw DomainError("unknown model kind");
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "km") return ModelKind::kaplan_meier;
  if (s == "cox") return ModelKind::cox;
  if (s == "gbcox") return ModelKind::gb_cox;
  if (s == "rsf") return ModelKind::rsf;
  if (s == "aft") return ModelKind::weibull_aft;
  throw ParameterError("unknown model kind \"" + s +
                       "\"; expected km|cox|gbcox|rsf|aft");
}

// Uniform per-subject survival-curve predictor over the five model families,
// with an optional embedded calibration map. Model files are self-describing
// (kind + version + hyperparameters), so consumers need no extra flags.
struct FittedModel {
  using Variant = std::variant<KaplanMeierModel, CoxModel, WeibullAftModel,
                               RsfModel, GbCoxModel>;
  Variant model;
  std::optional<IsotonicMap> calibration;

  ModelKind kind() const {
    if (std::holds_alternative<KaplanMeierModel>(model))
      return ModelKind::kaplan_meier;
    if (std::holds_alternative<CoxModel>(model)) return ModelKind::cox;
    if (std::holds_alternative<WeibullAftModel>(model))
      return ModelKind::weibull_aft;
    if (std::holds_alternative<RsfModel>(model)) return ModelKind::rsf;
    return ModelKind::gb_cox;
  }

  const std::vector<std::string>& feature_names() const {
    static const std::vector<std::string> none;
    if (auto* m = std::get_if<CoxModel>(&model)) return m->feature_names;
    if (auto* m = std::get_if<WeibullAftModel>(&model)) return m->feature_names;
    if (auto* m = std::get_if<RsfModel>(&model)) return m->feature_names;
    if (auto* m = std::get_if<GbCoxModel>(&model)) return m->feature_names;
    return none;  // population-level Kaplan-Meier
  }

  // t_hint lets parametric curves extend to the forecast horizon; step
  // models keep their training support and plateau beyond it.
  SurvivalCurve predict_survival(std::span<const double> x,
                                 double t_hint = 0.0) const {
    if (auto* m = std::get_if<KaplanMeierModel>(&model)) return m->curve;
    if (auto* m = std::get_if<CoxModel>(&model)) return m->predict_survival(x);
    if (auto* m = std::get_if<WeibullAftModel>(&model))
      return m->predict_survival(x, t_hint);
    if (auto* m = std::get_if<RsfModel>(&model)) return m->predict_survival(x);
    return std::get<GbCoxModel>(model).predict_survival(x);
  }

  // Higher = riskier; used for concordance. KM has no covariates, every
  // subject scores the same.
  double risk_score(std::span<const double> x) const {
    if (std::holds_alternative<KaplanMeierModel>(model)) return 0.0;
    if (auto* m = std::get_if<CoxModel>(&model)) return m->risk_score(x);
    if (auto* m = std::get_if<WeibullAftModel>(&model))
      return -m->linear_predictor(x);
    if (auto* m = std::get_if<RsfModel>(&model)) return m->risk_score(x);
    return std::get<GbCoxModel>(model).risk_score(x);
  }

  nlohmann::json to_json() const;
  static FittedModel from_json(const nlohmann::json& j);

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write \"" + path + "\"");
    out << to_json().dump(2) << "\n";
  }

  static FittedModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open \"" + path + "\"");
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

namespace detail {

inline nlohmann::json step_to_json(const StepFunction& f) {
  return {{"times", f.times}, {"values", f.values}};
}

inline StepFunction step_from_json(const nlohmann::json& j) {
  StepFunction f;
  f.times = j.at("times").get<std::vector<double>>();
  f.values = j.at("values").get<std::vector<double>>();
  return f;
}

inline nlohmann::json curve_to_json(const SurvivalCurve& c) {
  return {{"times", c.times}, {"probs", c.probs}};
}

inline SurvivalCurve curve_from_json(const nlohmann::json& j) {
  SurvivalCurve c;
  c.times = j.at("times").get<std::vector<double>>();
  c.probs = j.at("probs").get<std::vector<double>>();
  return c;
}

}  // namespace detail

inline nlohmann::json FittedModel::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = to_string(kind());
  j["feature_names"] = feature_names();
  if (calibration) {
    j["calibration"] = {{"breakpoints", calibration->breakpoints},
                        {"values", calibration->values}};
  }

  if (auto* m = std::get_if<KaplanMeierModel>(&model)) {
    j["curve"] = detail::curve_to_json(m->curve);
    j["event_times"] = m->event_times;
    j["event_counts"] = m->event_counts;
    j["risk_counts"] = m->risk_counts;
  } else if (auto* m = std::get_if<CoxModel>(&model)) {
    j["beta"] = m->beta;
    j["feature_means"] = m->feature_means;
    j["baseline_cum_hazard"] = detail::step_to_json(m->baseline_cum_hazard);
    j["diagnostics"] = {{"iterations", m->iterations},
                        {"gradient_max_norm", m->gradient_max_norm},
                        {"log_likelihood", m->log_likelihood}};
  } else if (auto* m = std::get_if<WeibullAftModel>(&model)) {
    j["beta"] = m->beta;  // [intercept, features...]
    j["sigma"] = m->sigma;
    j["max_train_time"] = m->max_train_time;
    j["curve_grid_points"] = m->curve_grid_points;
    j["diagnostics"] = {{"iterations", m->iterations},
                        {"gradient_max_norm", m->gradient_max_norm},
                        {"log_likelihood", m->log_likelihood}};
  } else if (auto* m = std::get_if<RsfModel>(&model)) {
    j["hyperparameters"] = {{"n_trees", m->params.n_trees},
                            {"mtry", m->params.mtry},
                            {"min_leaf_size", m->params.min_leaf_size},
                            {"min_leaf_events", m->params.min_leaf_events},
                            {"seed", m->params.seed}};
    j["grid"] = m->grid;
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : m->trees) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& n : tree.nodes)
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.leaf});
      nlohmann::json leaves = nlohmann::json::array();
      for (const auto& leaf : tree.leaves) {
        leaves.push_back({{"cum_hazard", detail::step_to_json(leaf.cum_hazard)},
                          {"n_subjects", leaf.n_subjects},
                          {"n_events", leaf.n_events}});
      }
      trees.push_back(
          {{"seed", tree.seed}, {"nodes", nodes}, {"leaves", leaves}});
    }
    j["trees"] = trees;
  } else if (auto* m = std::get_if<GbCoxModel>(&model)) {
    j["hyperparameters"] = {{"n_stages", m->params.n_stages},
                            {"learning_rate", m->params.learning_rate},
                            {"max_depth", m->params.max_depth},
                            {"min_leaf_size", m->params.min_leaf_size},
                            {"subsample", m->params.subsample},
                            {"seed", m->params.seed}};
    j["baseline_cum_hazard"] = detail::step_to_json(m->baseline_cum_hazard);
    j["loss_trace"] = m->loss_trace;
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& tree : m->stages) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& n : tree.nodes)
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
      stages.push_back(nodes);
    }
    j["stages"] = stages;
  }
  return j;
}

inline FittedModel FittedModel::from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1)
    throw ParseError("model file: unsupported format version");
  const ModelKind kind = model_kind_from_string(j.at("kind").get<std::string>());
  const auto names = j.at("feature_names").get<std::vector<std::string>>();

  FittedModel out;
  switch (kind) {
    case ModelKind::kaplan_meier: {
      KaplanMeierModel m;
      m.curve = detail::curve_from_json(j.at("curve"));
      m.event_times = j.at("event_times").get<std::vector<double>>();
      m.event_counts = j.at("event_counts").get<std::vector<int>>();
      m.risk_counts = j.at("risk_counts").get<std::vector<int>>();
      out.model = std::move(m);
      break;
    }
    case ModelKind::cox: {
      CoxModel m;
      m.feature_names = names;
      m.beta = j.at("beta").get<std::vector<double>>();
      m.feature_means = j.at("feature_means").get<std::vector<double>>();
      m.baseline_cum_hazard = detail::step_from_json(j.at("baseline_cum_hazard"));
      const auto& d = j.at("diagnostics");
      m.iterations = d.at("iterations").get<int>();
      m.gradient_max_norm = d.at("gradient_max_norm").get<double>();
      m.log_likelihood = d.at("log_likelihood").get<double>();
      out.model = std::move(m);
      break;
    }
    case ModelKind::weibull_aft: {
      WeibullAftModel m;
      m.feature_names = names;
      m.beta = j.at("beta").get<std::vector<double>>();
      m.sigma = j.at("sigma").get<double>();
      m.max_train_time = j.at("max_train_time").get<double>();
      m.curve_grid_points = j.at("curve_grid_points").get<int>();
      const auto& d = j.at("diagnostics");
      m.iterations = d.at("iterations").get<int>();
      m.gradient_max_norm = d.at("gradient_max_norm").get<double>();
      m.log_likelihood = d.at("log_likelihood").get<double>();
      out.model = std::move(m);
      break;
    }
    case ModelKind::rsf: {
      RsfModel m;
      m.feature_names = names;
      const auto& h = j.at("hyperparameters");
      m.params.n_trees = h.at("n_trees").get<int>();
      m.params.mtry = h.at("mtry").get<int>();
      m.params.min_leaf_size = h.at("min_leaf_size").get<int>();
      m.params.min_leaf_events = h.at("min_leaf_events").get<int>();
      m.params.seed = h.at("seed").get<std::uint64_t>();
      m.grid = j.at("grid").get<std::vector<double>>();
      for (const auto& tj : j.at("trees")) {
        SurvivalTree tree;
        tree.seed = tj.at("seed").get<std::uint64_t>();
        for (const auto& nj : tj.at("nodes")) {
          SurvivalTreeNode n;
          n.feature = nj.at(0).get<int>();
          n.threshold = nj.at(1).get<double>();
          n.left = nj.at(2).get<int>();
          n.right = nj.at(3).get<int>();
          n.leaf = nj.at(4).get<int>();
          tree.nodes.push_back(n);
        }
        for (const auto& lj : tj.at("leaves")) {
          SurvivalLeaf leaf;
          leaf.cum_hazard = detail::step_from_json(lj.at("cum_hazard"));
          leaf.n_subjects = lj.at("n_subjects").get<int>();
          leaf.n_events = lj.at("n_events").get<int>();
          tree.leaves.push_back(std::move(leaf));
        }
        m.trees.push_back(std::move(tree));
      }
      out.model = std::move(m);
      break;
    }
    case ModelKind::gb_cox: {
      GbCoxModel m;
      m.feature_names = names;
      const auto& h = j.at("hyperparameters");
      m.params.n_stages = h.at("n_stages").get<int>();
      m.params.learning_rate = h.at("learning_rate").get<double>();
      m.params.max_depth = h.at("max_depth").get<int>();
      m.params.min_leaf_size = h.at("min_leaf_size").get<int>();
      m.params.subsample = h.at("subsample").get<double>();
      m.params.seed = h.at("seed").get<std::uint64_t>();
      m.learning_rate = m.params.learning_rate;
      m.baseline_cum_hazard = detail::step_from_json(j.at("baseline_cum_hazard"));
      m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
      for (const auto& sj : j.at("stages")) {
        RegressionTree tree;
        for (const auto& nj : sj) {
          RegressionTreeNode n;
          n.feature = nj.at(0).get<int>();
          n.threshold = nj.at(1).get<double>();
          n.left = nj.at(2).get<int>();
          n.right = nj.at(3).get<int>();
          n.value = nj.at(4).get<double>();
          tree.nodes.push_back(n);
        }
        m.stages.push_back(std::move(tree));
      }
      out.model = std::move(m);
      break;
    }
  }
  if (j.contains("calibration")) {
    IsotonicMap map;
    map.breakpoints =
        j.at("calibration").at("breakpoints").get<std::vector<double>>();
    map.values = j.at("calibration").at("values").get<std::vector<double>>();
    out.calibration = std::move(map);
  }
  return out;
}

}  // namespace fleetlife
