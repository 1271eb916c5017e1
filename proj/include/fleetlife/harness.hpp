#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "fleetlife/config.hpp"
#include "fleetlife/dataset.hpp"
#include "fleetlife/detail/csv.hpp"
#include "fleetlife/forecast.hpp"
#include "fleetlife/metrics.hpp"
#include "fleetlife/model.hpp"
#include "fleetlife/synth.hpp"

namespace fleetlife {

struct ExperimentPlan {
  enum class Calibration { off, on, both };

  std::vector<PredictionWindow> windows;
  std::vector<ModelKind> models = {ModelKind::kaplan_meier, ModelKind::cox,
                                   ModelKind::gb_cox, ModelKind::rsf,
                                   ModelKind::weibull_aft};
  Calibration default_calibration = Calibration::both;
  std::map<ModelKind, Calibration> calibration_overrides;
  int repeats = 5;   // resampling repeats for the stochastic models
  int k_folds = 10;  // CI/IBS evaluation on the latest window
  std::uint64_t seed = 0;
  BrierMode brier_mode = BrierMode::ipcw;
  int threads = 1;

  RsfParams rsf;
  GbCoxParams gb_cox;
  CoxOptions cox;
  AftOptions aft;

  std::vector<bool> calibration_variants(ModelKind kind) const {
    Calibration c = default_calibration;
    auto it = calibration_overrides.find(kind);
    if (it != calibration_overrides.end()) c = it->second;
    switch (c) {
      case Calibration::off: return {false};
      case Calibration::on: return {true};
      case Calibration::both: return {false, true};
    }
    return {false};
  }

  void validate() const {
    if (windows.empty()) throw ParameterError("plan: needs >= 1 window");
    for (const auto& w : windows) w.validate();
    if (models.empty()) throw ParameterError("plan: needs >= 1 model");
    if (repeats < 1) throw ParameterError("plan: repeats must be >= 1");
    if (k_folds < 2) throw ParameterError("plan: k_folds must be >= 2");
  }

  static Calibration calibration_from_string(const std::string& s) {
    if (s == "off") return Calibration::off;
    if (s == "on") return Calibration::on;
    if (s == "both") return Calibration::both;
    throw ParameterError("plan: calibration must be off|on|both");
  }

  // Hyperparameters, evaluation, and seed keys shared by run-plan and fit.
  static void read_shared_config(const Config& cfg, ExperimentPlan& plan) {
    plan.repeats = static_cast<int>(cfg.get_int("repeats", plan.repeats));
    plan.k_folds = static_cast<int>(cfg.get_int("k_folds", plan.k_folds));
    plan.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    const std::string mode = cfg.get_string("brier_mode", "ipcw");
    if (mode == "naive") plan.brier_mode = BrierMode::naive;
    else if (mode == "ipcw") plan.brier_mode = BrierMode::ipcw;
    else throw ParameterError("plan: brier_mode must be naive|ipcw");
    plan.threads = static_cast<int>(cfg.get_int("threads", plan.threads));

    plan.rsf.n_trees =
        static_cast<int>(cfg.get_int("rsf.n_trees", plan.rsf.n_trees));
    plan.rsf.mtry = static_cast<int>(cfg.get_int("rsf.mtry", plan.rsf.mtry));
    plan.rsf.min_leaf_size = static_cast<int>(
        cfg.get_int("rsf.min_leaf_size", plan.rsf.min_leaf_size));
    plan.rsf.min_leaf_events = static_cast<int>(
        cfg.get_int("rsf.min_leaf_events", plan.rsf.min_leaf_events));
    plan.gb_cox.n_stages =
        static_cast<int>(cfg.get_int("gbcox.n_stages", plan.gb_cox.n_stages));
    plan.gb_cox.learning_rate =
        cfg.get_double("gbcox.learning_rate", plan.gb_cox.learning_rate);
    plan.gb_cox.max_depth =
        static_cast<int>(cfg.get_int("gbcox.max_depth", plan.gb_cox.max_depth));
    plan.gb_cox.min_leaf_size = static_cast<int>(
        cfg.get_int("gbcox.min_leaf_size", plan.gb_cox.min_leaf_size));
    plan.gb_cox.subsample =
        cfg.get_double("gbcox.subsample", plan.gb_cox.subsample);
  }

  static ExperimentPlan from_config(const Config& cfg) {
    ExperimentPlan plan;
    if (cfg.has("windows")) {
      plan.windows.clear();
      for (const auto& token : cfg.get_list("windows")) {
        const auto slash = token.find('/');
        if (slash == std::string::npos)
          throw ParameterError("plan: window token \"" + token +
                               "\" is not t0/t1");
        plan.windows.push_back(
            PredictionWindow{parse_date(token.substr(0, slash)),
                             parse_date(token.substr(slash + 1))});
      }
    } else {
      plan.windows = make_windows(
          cfg.get_date("first_t0"),
          static_cast<int>(cfg.get_int("window_count", 6)),
          static_cast<int>(cfg.get_int("step_months", 6)),
          static_cast<int>(cfg.get_int("horizon_months", 12)));
    }
    if (cfg.has("models")) {
      plan.models.clear();
      for (const auto& name : cfg.get_list("models"))
        plan.models.push_back(model_kind_from_string(name));
    }
    plan.default_calibration =
        calibration_from_string(cfg.get_string("calibration", "both"));
    for (const auto& kind :
         {ModelKind::kaplan_meier, ModelKind::cox, ModelKind::gb_cox,
          ModelKind::rsf, ModelKind::weibull_aft}) {
      const std::string key = "calibration." + to_string(kind);
      if (cfg.has(key))
        plan.calibration_overrides[kind] =
            calibration_from_string(cfg.get_string(key));
    }
    read_shared_config(cfg, plan);
    plan.validate();
    return plan;
  }
};

inline bool stochastic(ModelKind kind) {
  return kind == ModelKind::rsf || kind == ModelKind::gb_cox;
}

// Fits one model family on a training split. Constant feature columns are
// dropped first (the fitters reject them); the fitted model records the kept
// names, and prediction-time callers project records onto them.
inline FittedModel fit_model(ModelKind kind, const Dataset& train,
                             const ExperimentPlan& hyper, std::uint64_t seed,
                             int threads = 1) {
  FittedModel out;
  if (kind == ModelKind::kaplan_meier) {
    out.model = fit_kaplan_meier(train);
    return out;
  }

  std::vector<std::string> kept;
  {
    const auto constant = train.constant_features();
    for (const auto& name : train.feature_names) {
      if (std::find(constant.begin(), constant.end(), name) == constant.end())
        kept.push_back(name);
    }
  }
  if (kept.empty())
    throw DegenerateFeatureError("fit: every feature is constant");
  const Dataset reduced =
      kept.size() == train.feature_names.size() ? train
                                                : train.with_features(kept);

  switch (kind) {
    case ModelKind::cox:
      out.model = fit_cox(reduced, hyper.cox);
      break;
    case ModelKind::weibull_aft:
      out.model = fit_weibull_aft(reduced, hyper.aft);
      break;
    case ModelKind::rsf: {
      RsfParams params = hyper.rsf;
      params.seed = seed;
      params.threads = threads;
      out.model = fit_rsf(reduced, params);
      break;
    }
    case ModelKind::gb_cox: {
      GbCoxParams params = hyper.gb_cox;
      params.seed = seed;
      out.model = fit_gb_cox(reduced, params);
      break;
    }
    default:
      throw ParameterError("fit_model: unknown kind");
  }
  return out;
}

// Structural no-leak property: nothing in a training split resolves past t0.
inline bool training_leak_free(const Dataset& train, Date t0) {
  for (const auto& r : train.records) {
    if (r.last_log_date > t0) return false;
  }
  return true;
}

struct CellResult {
  int window_index = 0;
  PredictionWindow window;
  ModelKind model = ModelKind::kaplan_meier;
  bool calibrated = false;
  bool skipped = false;
  std::string note;
  double expected = 0.0;
  double variance = 0.0;
  double actual = 0.0;
  std::optional<double> abs_pct_error;
  int repeats = 1;
  int excluded_subjects = 0;
};

struct ConfigSummary {
  ModelKind model = ModelKind::kaplan_meier;
  bool calibrated = false;
  std::optional<double> mape;  // mean over scored windows
  int windows_scored = 0;
};

struct MetricsRow {
  ModelKind model = ModelKind::kaplan_meier;
  std::optional<double> ci;
  std::optional<double> ibs;
  int ci_folds = 0;
  int ibs_folds = 0;
};

struct ExperimentReport {
  std::vector<PredictionWindow> windows;
  std::vector<CellResult> cells;
  std::vector<ConfigSummary> summaries;
  std::vector<MetricsRow> metrics;
  double random_ci = 0.5;
  double random_ibs = 0.25;
  bool leak_check_passed = true;
  int cells_checked = 0;
  int skipped_cells = 0;
  BrierMode brier_mode = BrierMode::ipcw;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  void write_cells_csv(const std::string& path) const;
  std::string metrics_table_text() const;
  void write_svg(const std::string& path) const;
};

inline std::string display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kaplan_meier: return "KM";
    case ModelKind::cox: return "CoxPH";
    case ModelKind::gb_cox: return "GB-Cox";
    case ModelKind::rsf: return "RSF";
    case ModelKind::weibull_aft: return "Weibull AFT";
  }
  return "?";
}

namespace detail {

struct KfoldScore {
  std::optional<double> ci;
  std::optional<double> ibs;
  int ci_folds = 0;
  int ibs_folds = 0;
};

inline KfoldScore kfold_evaluate(ModelKind kind, const Dataset& train,
                                 const ExperimentPlan& hyper, int k,
                                 std::uint64_t seed, BrierMode mode,
                                 int threads) {
  const std::size_t n = train.size();
  if (n < static_cast<std::size_t>(2 * k))
    throw InsufficientDataError("k-fold: dataset too small for k folds");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x6b666f6cULL));
  rng.shuffle(order);

  KfoldScore score;
  double ci_sum = 0.0, ibs_sum = 0.0;
  for (int fold = 0; fold < k; ++fold) {
    Dataset fit_part, test_part;
    fit_part.feature_names = train.feature_names;
    test_part.feature_names = train.feature_names;
    for (std::size_t i = 0; i < n; ++i) {
      const bool in_test = static_cast<int>(i % static_cast<std::size_t>(k)) == fold;
      (in_test ? test_part : fit_part)
          .records.push_back(train.records[order[i]]);
    }
    if (test_part.empty() || fit_part.n_events() < 2) continue;

    FittedModel model;
    try {
      model = fit_model(kind, fit_part, hyper,
                        mix_seed(seed, 0xf17, static_cast<std::uint64_t>(fold)),
                        threads);
    } catch (const Error&) {
      continue;  // fold not fittable; counted by the fold totals
    }
    const Dataset test_proj =
        kind == ModelKind::kaplan_meier
            ? test_part
            : test_part.with_features(model.feature_names());

    if (kind != ModelKind::kaplan_meier) {
      std::vector<double> risk;
      risk.reserve(test_proj.size());
      for (const auto& r : test_proj.records)
        risk.push_back(model.risk_score(r.features));
      const auto cr = concordance_index(risk, test_proj);
      if (cr.applicable) {
        ci_sum += cr.ci;
        ++score.ci_folds;
      }
    }

    try {
      const auto grid = default_brier_grid(test_proj, 100);
      if (grid.front() < grid.back()) {
        std::vector<SurvivalCurve> curves;
        curves.reserve(test_proj.size());
        for (const auto& r : test_proj.records)
          curves.push_back(model.predict_survival(r.features, grid.back()));
        ibs_sum += integrated_brier_score(curves, test_proj, grid, mode);
        ++score.ibs_folds;
      }
    } catch (const Error&) {
      // fold without enough events for a grid; skip
    }
  }
  if (score.ci_folds > 0) score.ci = ci_sum / score.ci_folds;
  if (score.ibs_folds > 0) score.ibs = ibs_sum / score.ibs_folds;
  return score;
}

}  // namespace detail

// Runs the full protocol: for every window and configuration, fit on the
// window's train split, calibrate on the previous window's resolved pairs
// when requested, forecast, and score the expected count against the actual.
// CI/IBS are evaluated k-fold on the latest window's train split, next to a
// constant-risk random-estimator baseline. When ground truth is supplied the
// actual counts come from it; otherwise from the data-resolved truth split.
inline ExperimentReport run_plan(const ExperimentPlan& plan, const Dataset& ds,
                                 const GroundTruth* gt = nullptr) {
  plan.validate();
  ExperimentReport report;
  report.brier_mode = plan.brier_mode;
  report.seed = plan.seed;

  std::vector<PredictionWindow> windows = plan.windows;
  std::sort(windows.begin(), windows.end(),
            [](const PredictionWindow& a, const PredictionWindow& b) {
              return a.t0 < b.t0;
            });
  report.windows = windows;  // cell indices refer to this order

  struct WindowData {
    Dataset train, truth, at_risk;
    double actual = 0.0;
  };
  std::vector<WindowData> wd(windows.size());
  for (std::size_t wi = 0; wi < windows.size(); ++wi) {
    auto [train, truth] = restrict_to_window(ds, windows[wi]);
    wd[wi].at_risk = at_risk_at(train, windows[wi].t0);
    wd[wi].actual = gt ? static_cast<double>(true_window_failures(*gt, windows[wi]))
                       : static_cast<double>(truth.n_events());
    wd[wi].train = std::move(train);
    wd[wi].truth = std::move(truth);

    if (!training_leak_free(wd[wi].train, windows[wi].t0)) {
      report.leak_check_passed = false;
      throw Error("run_plan: leak check failed at window " +
                  to_string(windows[wi].t0));
    }
    ++report.cells_checked;
  }

  // Fit cache over (window, kind, repeat).
  std::map<std::tuple<std::size_t, ModelKind, int>, FittedModel> cache;
  auto fitted = [&](std::size_t wi, ModelKind kind, int repeat) -> FittedModel& {
    const auto key = std::make_tuple(wi, kind, repeat);
    auto it = cache.find(key);
    if (it == cache.end()) {
      const auto seed = mix_seed(plan.seed, static_cast<std::uint64_t>(wi) * 131 +
                                                static_cast<std::uint64_t>(repeat),
                                 static_cast<std::uint64_t>(kind));
      it = cache.emplace(key, fit_model(kind, wd[wi].train, plan, seed,
                                        plan.threads))
               .first;
    }
    return it->second;
  };

  for (std::size_t wi = 0; wi < windows.size(); ++wi) {
    for (ModelKind kind : plan.models) {
      const int repeats = stochastic(kind) ? plan.repeats : 1;
      for (bool calibrated : plan.calibration_variants(kind)) {
        CellResult cell;
        cell.window_index = static_cast<int>(wi);
        cell.window = windows[wi];
        cell.model = kind;
        cell.calibrated = calibrated;
        cell.repeats = repeats;
        cell.actual = wd[wi].actual;

        if (calibrated && wi == 0) {
          cell.skipped = true;
          cell.note = "no prior window to calibrate on";
          report.cells.push_back(std::move(cell));
          ++report.skipped_cells;
          continue;
        }

        try {
          double expected_sum = 0.0, variance_sum = 0.0;
          int excluded_max = 0;
          for (int rep = 0; rep < repeats; ++rep) {
            const FittedModel& model = fitted(wi, kind, rep);
            const IsotonicMap* map = nullptr;
            IsotonicMap fitted_map;
            if (calibrated) {
              const std::size_t pw = wi - 1;
              const FittedModel& prev_model = fitted(pw, kind, rep);
              const Dataset prev_at_risk =
                  kind == ModelKind::kaplan_meier
                      ? wd[pw].at_risk
                      : wd[pw].at_risk.with_features(prev_model.feature_names());
              const auto prev_forecast =
                  forecast_window(prev_model, prev_at_risk, windows[pw]);
              const auto pairs = build_calibration_pairs(
                  prev_forecast.per_subject, wd[pw].truth, windows[pw]);
              fitted_map = fit_isotonic(pairs);
              map = &fitted_map;
            }
            const Dataset at_risk =
                kind == ModelKind::kaplan_meier
                    ? wd[wi].at_risk
                    : wd[wi].at_risk.with_features(model.feature_names());
            const auto fc = forecast_window(model, at_risk, windows[wi], map);
            expected_sum += fc.expected_failures;
            variance_sum += fc.variance;
            excluded_max = std::max(excluded_max, fc.excluded_count);
          }
          cell.expected = expected_sum / repeats;
          cell.variance = variance_sum / repeats;
          cell.excluded_subjects = excluded_max;
          if (cell.actual > 0.0) {
            cell.abs_pct_error =
                100.0 * std::abs(cell.actual - cell.expected) / cell.actual;
          } else {
            cell.note = "actual count is zero; percentage undefined";
          }
        } catch (const Error& e) {
          cell.skipped = true;
          cell.note = e.what();
          ++report.skipped_cells;
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }

  // Per-configuration MAPE over scored windows.
  for (ModelKind kind : plan.models) {
    for (bool calibrated : plan.calibration_variants(kind)) {
      ConfigSummary s;
      s.model = kind;
      s.calibrated = calibrated;
      double sum = 0.0;
      for (const auto& cell : report.cells) {
        if (cell.model != kind || cell.calibrated != calibrated) continue;
        if (cell.skipped || !cell.abs_pct_error) continue;
        sum += *cell.abs_pct_error;
        ++s.windows_scored;
      }
      if (s.windows_scored > 0) s.mape = sum / s.windows_scored;
      report.summaries.push_back(std::move(s));
    }
  }

  // CI/IBS on the latest window's train split, k-fold.
  const Dataset& latest = wd.back().train;
  for (ModelKind kind : plan.models) {
    MetricsRow row;
    row.model = kind;
    const auto score = detail::kfold_evaluate(
        kind, latest, plan, plan.k_folds,
        mix_seed(plan.seed, 0xcf, static_cast<std::uint64_t>(kind)),
        plan.brier_mode, plan.threads);
    if (kind != ModelKind::kaplan_meier) row.ci = score.ci;
    row.ibs = score.ibs;
    row.ci_folds = score.ci_folds;
    row.ibs_folds = score.ibs_folds;
    report.metrics.push_back(row);
  }

  // Random-estimator baseline: constant risks; constant 0.5 survival scored
  // with the naive Brier on a full-range grid.
  {
    std::vector<double> constant_risk(latest.size(), 0.0);
    const auto cr = concordance_index(constant_risk, latest);
    if (cr.applicable) report.random_ci = cr.ci;
    double max_event = 0.0;
    for (const auto& r : latest.records)
      if (r.event) max_event = std::max(max_event, r.observed_time);
    if (max_event > 0.0) {
      std::vector<double> grid = {0.0, max_event};
      SurvivalCurve half;
      half.times = {0.0};
      half.probs = {0.5};
      std::vector<SurvivalCurve> curves(latest.size(), half);
      report.random_ibs = integrated_brier_score(curves, latest, grid,
                                                 BrierMode::naive);
    }
  }
  return report;
}

// IBS-driven hyperparameter selection; ties break on first grid order.
struct GridPoint {
  std::map<std::string, double> values;
};

struct GridSearchResult {
  std::size_t best_index = 0;
  GridPoint best;
  double best_ibs = 0.0;
  std::vector<std::optional<double>> ibs_per_point;
  std::vector<std::string> notes;
};

inline GridSearchResult grid_search_ibs(ModelKind kind,
                                        const std::vector<GridPoint>& grid,
                                        const Dataset& train,
                                        const ExperimentPlan& base) {
  if (grid.empty()) throw ParameterError("grid search: empty grid");
  GridSearchResult out;
  out.ibs_per_point.resize(grid.size());
  out.notes.resize(grid.size());

  bool any = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    ExperimentPlan hyper = base;
    for (const auto& [key, value] : grid[g].values) {
      if (key == "n_trees") hyper.rsf.n_trees = static_cast<int>(value);
      else if (key == "mtry") hyper.rsf.mtry = static_cast<int>(value);
      else if (key == "min_leaf_size") {
        hyper.rsf.min_leaf_size = static_cast<int>(value);
        hyper.gb_cox.min_leaf_size = static_cast<int>(value);
      } else if (key == "min_leaf_events")
        hyper.rsf.min_leaf_events = static_cast<int>(value);
      else if (key == "n_stages") hyper.gb_cox.n_stages = static_cast<int>(value);
      else if (key == "learning_rate") hyper.gb_cox.learning_rate = value;
      else if (key == "max_depth") hyper.gb_cox.max_depth = static_cast<int>(value);
      else if (key == "subsample") hyper.gb_cox.subsample = value;
      else throw ParameterError("grid search: unknown hyperparameter \"" + key + "\"");
    }
    try {
      const auto score = detail::kfold_evaluate(
          kind, train, hyper, base.k_folds, mix_seed(base.seed, 0x9d, g),
          base.brier_mode, base.threads);
      if (!score.ibs) {
        out.notes[g] = "no fold produced an IBS";
        continue;
      }
      out.ibs_per_point[g] = *score.ibs;
      if (!any || *score.ibs < out.best_ibs) {
        any = true;
        out.best_index = g;
        out.best = grid[g];
        out.best_ibs = *score.ibs;
      }
    } catch (const Error& e) {
      out.notes[g] = e.what();
    }
  }
  if (!any) {
    std::ostringstream msg;
    msg << "grid search: every point failed:";
    for (std::size_t g = 0; g < grid.size(); ++g)
      msg << " [" << g << "] " << (out.notes[g].empty() ? "?" : out.notes[g]);
    throw Error(msg.str());
  }
  return out;
}

// === report writers ===

inline nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json windows_json = nlohmann::json::array();
  for (const auto& w : windows)
    windows_json.push_back({{"t0", to_string(w.t0)}, {"t1", to_string(w.t1)}});

  nlohmann::json cells_json = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json cj = {{"window_index", c.window_index},
                         {"t0", to_string(c.window.t0)},
                         {"t1", to_string(c.window.t1)},
                         {"model", to_string(c.model)},
                         {"calibrated", c.calibrated},
                         {"skipped", c.skipped},
                         {"note", c.note},
                         {"repeats", c.repeats},
                         {"excluded_subjects", c.excluded_subjects}};
    if (!c.skipped) {
      cj["expected"] = c.expected;
      cj["variance"] = c.variance;
      cj["actual"] = c.actual;
      if (c.abs_pct_error) cj["abs_pct_error"] = *c.abs_pct_error;
    }
    cells_json.push_back(std::move(cj));
  }

  nlohmann::json summaries_json = nlohmann::json::array();
  for (const auto& s : summaries) {
    nlohmann::json sj = {{"model", to_string(s.model)},
                         {"calibrated", s.calibrated},
                         {"windows_scored", s.windows_scored}};
    if (s.mape) sj["mape"] = *s.mape;
    summaries_json.push_back(std::move(sj));
  }

  nlohmann::json metrics_json = nlohmann::json::array();
  for (const auto& m : metrics) {
    nlohmann::json mj = {{"model", to_string(m.model)},
                         {"ci_folds", m.ci_folds},
                         {"ibs_folds", m.ibs_folds}};
    mj["ci"] = m.ci ? nlohmann::json(*m.ci) : nlohmann::json();
    mj["ibs"] = m.ibs ? nlohmann::json(*m.ibs) : nlohmann::json();
    metrics_json.push_back(std::move(mj));
  }

  return {{"format_version", 1},
          {"seed", seed},
          {"brier_mode", fleetlife::to_string(brier_mode)},
          {"windows", windows_json},
          {"cells", cells_json},
          {"summaries", summaries_json},
          {"metrics", metrics_json},
          {"random_estimator", {{"ci", random_ci}, {"ibs", random_ibs}}},
          {"leak_check",
           {{"passed", leak_check_passed}, {"cells_checked", cells_checked}}},
          {"skipped_cells", skipped_cells}};
}

inline void ExperimentReport::write_cells_csv(const std::string& path) const {
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : cells) {
    rows.push_back({std::to_string(c.window_index), to_string(c.window.t0),
                    to_string(c.window.t1), to_string(c.model),
                    c.calibrated ? "1" : "0", c.skipped ? "1" : "0", c.note,
                    c.skipped ? "" : detail::format_double(c.expected),
                    c.skipped ? "" : detail::format_double(c.variance),
                    c.skipped ? "" : detail::format_double(c.actual),
                    c.abs_pct_error ? detail::format_double(*c.abs_pct_error)
                                    : "",
                    std::to_string(c.repeats),
                    std::to_string(c.excluded_subjects)});
  }
  detail::write_csv_file(
      path,
      {"window_index", "t0", "t1", "model", "calibrated", "skipped", "note",
       "expected", "variance", "actual", "abs_pct_error", "repeats",
       "excluded_subjects"},
      rows);
}

inline std::string ExperimentReport::metrics_table_text() const {
  std::ostringstream out;
  char line[96];
  std::snprintf(line, sizeof(line), "%-18s %-8s %-8s\n", "Model", "CI", "IBS");
  out << line;
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("N/A");
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%.3f", *v);
    return std::string(buf);
  };
  for (const auto& m : metrics) {
    std::snprintf(line, sizeof(line), "%-18s %-8s %-8s\n",
                  display_name(m.model).c_str(), fmt(m.ci).c_str(),
                  fmt(m.ibs).c_str());
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-18s %-8s %-8s\n", "Random Estimator",
                fmt(random_ci).c_str(), fmt(random_ibs).c_str());
  out << line;
  return out.str();
}

// Grouped per-model bars of calibrated vs uncalibrated MAPE.
inline void ExperimentReport::write_svg(const std::string& path) const {
  struct Bar {
    std::string label;
    std::optional<double> calibrated, uncalibrated;
  };
  std::vector<Bar> bars;
  for (const auto& s : summaries) {
    auto it = std::find_if(bars.begin(), bars.end(), [&](const Bar& b) {
      return b.label == display_name(s.model);
    });
    if (it == bars.end()) {
      bars.push_back({display_name(s.model), {}, {}});
      it = bars.end() - 1;
    }
    (s.calibrated ? it->calibrated : it->uncalibrated) = s.mape;
  }

  double max_v = 1.0;
  for (const auto& b : bars) {
    if (b.calibrated) max_v = std::max(max_v, *b.calibrated);
    if (b.uncalibrated) max_v = std::max(max_v, *b.uncalibrated);
  }
  max_v = std::ceil(max_v * 1.15);

  const double width = 640, height = 400;
  const double ml = 56, mr = 16, mt = 24, mb = 64;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;
  const double group_w = plot_w / std::max<std::size_t>(bars.size(), 1);
  const double bar_w = group_w * 0.32;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" font-family=\"sans-serif\" "
      << "font-size=\"12\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";

  auto y_of = [&](double v) { return mt + plot_h * (1.0 - v / max_v); };
  for (int tick = 0; tick <= 5; ++tick) {
    const double v = max_v * tick / 5.0;
    const double y = y_of(v);
    svg << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << width - mr
        << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\">" << buf << "</text>\n";
  }
  svg << "<text x=\"14\" y=\"" << mt + plot_h / 2
      << "\" transform=\"rotate(-90 14 " << mt + plot_h / 2
      << ")\" text-anchor=\"middle\">MAPE</text>\n";

  auto draw_bar = [&](double x, std::optional<double> v, const char* fill) {
    if (!v) return;
    const double y = y_of(*v);
    svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w
        << "\" height=\"" << mt + plot_h - y << "\" fill=\"" << fill
        << "\"/>\n";
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%.1f", *v);
    svg << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << y - 4
        << "\" text-anchor=\"middle\">" << buf << "</text>\n";
  };

  for (std::size_t b = 0; b < bars.size(); ++b) {
    const double cx = ml + group_w * (static_cast<double>(b) + 0.5);
    draw_bar(cx - bar_w - 2, bars[b].calibrated, "#1a1a1a");
    draw_bar(cx + 2, bars[b].uncalibrated, "#8c8c8c");
    svg << "<text x=\"" << cx << "\" y=\"" << mt + plot_h + 18
        << "\" text-anchor=\"middle\" transform=\"rotate(30 " << cx << " "
        << mt + plot_h + 18 << ")\">" << bars[b].label << "</text>\n";
  }

  svg << "<rect x=\"" << width - mr - 150 << "\" y=\"" << mt
      << "\" width=\"12\" height=\"12\" fill=\"#1a1a1a\"/>\n";
  svg << "<text x=\"" << width - mr - 132 << "\" y=\"" << mt + 10
      << "\">Calibrated</text>\n";
  svg << "<rect x=\"" << width - mr - 150 << "\" y=\"" << mt + 18
      << "\" width=\"12\" height=\"12\" fill=\"#8c8c8c\"/>\n";
  svg << "<text x=\"" << width - mr - 132 << "\" y=\"" << mt + 28
      << "\">Uncalibrated</text>\n";
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write \"" + path + "\"");
  out << svg.str();
}

}  // namespace fleetlife
