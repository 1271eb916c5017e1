// fleetlife command line: generate, clean, fit, calibrate, forecast,
// evaluate, run-plan. Every randomized command takes --seed and reproduces
// byte-identical outputs; exit codes are 0 (ok), 1 (usage), 2 (data error).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fleetlife/fleetlife.hpp"

namespace fl = fleetlife;
using nlohmann::json;

namespace {

struct CommonFlags {
  bool quiet = false;
  int threads = 0;  // 0: machine parallelism
  std::string brier_mode = "ipcw";

  int resolved_threads() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
  }

  fl::BrierMode mode() const {
    if (brier_mode == "naive") return fl::BrierMode::naive;
    if (brier_mode == "ipcw") return fl::BrierMode::ipcw;
    throw fl::ParameterError("--mode must be naive or ipcw");
  }
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_flag("--quiet", flags.quiet,
                "machine-readable summaries only on stdout");
  cmd->add_option("--threads", flags.threads,
                  "worker threads (default: machine parallelism)");
}

void emit(const CommonFlags& flags, const json& summary,
          const std::string& human) {
  if (flags.quiet) {
    std::cout << summary.dump() << "\n";
  } else if (!human.empty()) {
    std::cout << human;
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fl::IoError("cannot write \"" + path + "\"");
  return out;
}

fl::FittedModel load_model(const std::string& path) {
  return fl::FittedModel::load(path);
}

// Restrict + at-risk + feature projection for one model at one window.
fl::Dataset at_risk_for(const fl::FittedModel& model, const fl::Dataset& ds,
                        const fl::PredictionWindow& w) {
  auto [train, truth] = fl::restrict_to_window(ds, w);
  fl::Dataset at_risk = fl::at_risk_at(train, w.t0);
  if (model.kind() == fl::ModelKind::kaplan_meier) return at_risk;
  return at_risk.with_features(model.feature_names());
}

int run_generate(const std::string& config_path, const std::string& out_path,
                 const std::string& truth_path, std::optional<long long> seed,
                 const CommonFlags& flags) {
  fl::FleetConfig cfg = config_path.empty()
                            ? fl::FleetConfig::default_fleet()
                            : fl::FleetConfig::from_config(
                                  fl::Config::from_file(config_path));
  if (seed) cfg.seed = static_cast<std::uint64_t>(*seed);
  auto [ds, gt] = fl::generate_fleet(cfg);
  fl::write_dataset_csv(ds, out_path);
  if (!truth_path.empty()) gt.save(truth_path);

  json summary = {{"command", "generate"},
                  {"records", ds.size()},
                  {"censoring_rate", ds.censoring_rate()},
                  {"snapshot", fl::to_string(gt.snapshot)},
                  {"out", out_path}};
  std::ostringstream human;
  human << "generated " << ds.size() << " records, censoring rate "
        << ds.censoring_rate() << ", snapshot " << fl::to_string(gt.snapshot)
        << " -> " << out_path << "\n";
  emit(flags, summary, human.str());
  return 0;
}

int run_clean(const std::string& in_path, const std::string& config_path,
              const std::string& out_path, const std::string& report_prefix,
              const CommonFlags& flags) {
  const fl::Dataset ds = fl::load_csv(in_path);
  fl::CleaningConfig cfg = config_path.empty()
                               ? fl::CleaningConfig{}
                               : fl::CleaningConfig::from_config(
                                     fl::Config::from_file(config_path));
  auto [cleaned, report] = fl::clean(ds, cfg);
  fl::write_dataset_csv(cleaned, out_path);
  if (!report_prefix.empty()) {
    report.write_csv(report_prefix + ".csv");
    open_out(report_prefix + ".txt") << report.to_text();
  }

  json removed;
  for (const auto& [rule, count] : report.removed) removed[rule] = count;
  json summary = {{"command", "clean"},
                  {"input_records", report.input_records},
                  {"kept_records", report.kept_records},
                  {"removed", removed},
                  {"flagged_storage", report.flagged_storage},
                  {"out", out_path}};
  emit(flags, summary, report.to_text());
  return 0;
}

int run_fit(const std::string& model_name, const std::string& train_path,
            const std::string& out_path, const std::string& config_path,
            const std::string& t0, std::optional<long long> seed,
            const CommonFlags& flags) {
  const fl::ModelKind kind = fl::model_kind_from_string(model_name);
  fl::Dataset train = fl::load_csv(train_path);
  if (!t0.empty()) {
    fl::PredictionWindow w{fl::parse_date(t0),
                           fl::add_days(fl::parse_date(t0), 1)};
    train = fl::restrict_to_window(train, w).first;
  }

  fl::ExperimentPlan hyper;
  if (!config_path.empty())
    fl::ExperimentPlan::read_shared_config(fl::Config::from_file(config_path),
                                           hyper);
  const std::uint64_t fit_seed =
      seed ? static_cast<std::uint64_t>(*seed) : hyper.seed;
  const fl::FittedModel model =
      fl::fit_model(kind, train, hyper, fit_seed, flags.resolved_threads());
  model.save(out_path);

  json summary = {{"command", "fit"},
                  {"model", fl::to_string(kind)},
                  {"records", train.size()},
                  {"events", train.n_events()},
                  {"out", out_path}};
  std::ostringstream human;
  human << "fitted " << fl::display_name(kind) << " on " << train.size()
        << " records (" << train.n_events() << " events) -> " << out_path
        << "\n";
  emit(flags, summary, human.str());
  return 0;
}

int run_calibrate(const std::string& model_path, const std::string& data_path,
                  const std::string& t0, const std::string& t1,
                  const std::string& out_path, const CommonFlags& flags) {
  fl::FittedModel model = load_model(model_path);
  const fl::Dataset ds = fl::load_csv(data_path);
  const fl::PredictionWindow w{fl::parse_date(t0), fl::parse_date(t1)};
  auto [train, truth] = fl::restrict_to_window(ds, w);
  fl::Dataset at_risk = fl::at_risk_at(train, w.t0);
  if (model.kind() != fl::ModelKind::kaplan_meier)
    at_risk = at_risk.with_features(model.feature_names());

  const auto forecast = fl::forecast_window(model, at_risk, w);
  const auto pairs =
      fl::build_calibration_pairs(forecast.per_subject, truth, w);
  if (model.calibration)
    std::cerr << "note: replacing the calibration map already in "
              << model_path << "\n";
  model.calibration = fl::fit_isotonic(pairs);
  model.save(out_path);

  json summary = {{"command", "calibrate"},
                  {"pairs", pairs.size()},
                  {"breakpoints", model.calibration->breakpoints.size()},
                  {"out", out_path}};
  std::ostringstream human;
  human << "calibrated on " << pairs.size() << " resolved pairs ("
        << model.calibration->breakpoints.size() << " breakpoints) -> "
        << out_path << "\n";
  emit(flags, summary, human.str());
  return 0;
}

int run_forecast(const std::string& model_path, const std::string& data_path,
                 const std::string& t0, const std::string& t1,
                 const std::string& out_prefix, const CommonFlags& flags) {
  const fl::FittedModel model = load_model(model_path);
  const fl::Dataset ds = fl::load_csv(data_path);
  const fl::PredictionWindow w{fl::parse_date(t0), fl::parse_date(t1)};
  const fl::Dataset at_risk = at_risk_for(model, ds, w);
  const fl::IsotonicMap* map =
      model.calibration ? &*model.calibration : nullptr;
  const auto fc = fl::forecast_window(model, at_risk, w, map);

  std::vector<std::vector<std::string>> rows;
  for (const auto& [id, p] : fc.per_subject)
    rows.push_back({id, fl::detail::format_double(p)});
  fl::detail::write_csv_file(out_prefix + ".csv",
                             {"id", "failure_probability"}, rows);

  json excluded = json::array();
  for (const auto& id : fc.excluded_ids) excluded.push_back(id);
  json summary = {{"command", "forecast"},
                  {"t0", fl::to_string(w.t0)},
                  {"t1", fl::to_string(w.t1)},
                  {"subjects", fc.per_subject.size()},
                  {"expected_failures", fc.expected_failures},
                  {"variance", fc.variance},
                  {"calibrated", fc.calibrated},
                  {"excluded_count", fc.excluded_count},
                  {"excluded_ids", excluded}};
  open_out(out_prefix + ".json") << summary.dump(2) << "\n";

  std::ostringstream human;
  human << "window " << fl::to_string(w.t0) << " -> " << fl::to_string(w.t1)
        << ": expected failures " << fc.expected_failures << " (variance "
        << fc.variance << ") over " << fc.per_subject.size() << " subjects"
        << (fc.calibrated ? ", calibrated" : "") << "\n";
  emit(flags, summary, human.str());
  return 0;
}

int run_evaluate(const std::string& model_path, const std::string& data_path,
                 const std::string& out_path, const CommonFlags& flags) {
  const fl::FittedModel model = load_model(model_path);
  fl::Dataset ds = fl::load_csv(data_path);
  if (model.kind() != fl::ModelKind::kaplan_meier)
    ds = ds.with_features(model.feature_names());

  fl::MetricReport report;
  report.brier_mode = flags.mode();

  if (model.kind() != fl::ModelKind::kaplan_meier) {
    std::vector<double> risk;
    risk.reserve(ds.size());
    for (const auto& r : ds.records) risk.push_back(model.risk_score(r.features));
    const auto cr = fl::concordance_index(risk, ds);
    if (cr.applicable) report.ci = cr.ci;
    report.n_comparable_pairs = cr.n_comparable;
  }

  const auto grid = fl::default_brier_grid(ds, 100);
  std::vector<fl::SurvivalCurve> curves;
  curves.reserve(ds.size());
  for (const auto& r : ds.records)
    curves.push_back(model.predict_survival(r.features, grid.back()));
  fl::BrierDiagnostics diag;
  report.ibs = fl::integrated_brier_score(curves, ds, grid, report.brier_mode,
                                          0.0, &report.brier_curve, &diag);
  report.t_max = grid.back();
  report.dropped_subjects = diag.dropped_subjects;

  json brier = json::array();
  for (const auto& [t, bs] : report.brier_curve) brier.push_back({t, bs});
  json summary = {{"command", "evaluate"},
                  {"model", fl::to_string(model.kind())},
                  {"ci", report.ci ? json(*report.ci) : json()},
                  {"n_comparable_pairs", report.n_comparable_pairs},
                  {"ibs", report.ibs},
                  {"t_max", report.t_max},
                  {"brier_mode", fl::to_string(report.brier_mode)},
                  {"dropped_subjects", report.dropped_subjects},
                  {"brier_curve", brier}};
  if (!out_path.empty()) open_out(out_path) << summary.dump(2) << "\n";

  std::ostringstream human;
  human << "model " << fl::display_name(model.kind()) << ": CI ";
  if (report.ci) human << *report.ci;
  else human << "N/A";
  human << " (" << report.n_comparable_pairs << " pairs), IBS " << report.ibs
        << " [" << fl::to_string(report.brier_mode) << "]\n";
  emit(flags, summary, human.str());
  return 0;
}

int run_plan_cmd(const std::string& plan_path, const std::string& data_path,
                 const std::string& truth_path, const std::string& report_dir,
                 std::optional<long long> seed, bool mode_given,
                 const CommonFlags& flags) {
  const fl::Config plan_cfg = fl::Config::from_file(plan_path);
  fl::ExperimentPlan plan = fl::ExperimentPlan::from_config(plan_cfg);
  if (seed) plan.seed = static_cast<std::uint64_t>(*seed);
  if (mode_given) plan.brier_mode = flags.mode();
  // flag > plan config > machine parallelism
  if (flags.threads > 0) plan.threads = flags.threads;
  else if (!plan_cfg.has("threads")) plan.threads = flags.resolved_threads();

  const fl::Dataset ds = fl::load_csv(data_path);
  std::optional<fl::GroundTruth> gt;
  if (!truth_path.empty()) gt = fl::GroundTruth::load(truth_path);

  const fl::ExperimentReport report =
      fl::run_plan(plan, ds, gt ? &*gt : nullptr);

  std::filesystem::create_directories(report_dir);
  const auto base = std::filesystem::path(report_dir);
  report.write_cells_csv((base / "cells.csv").string());
  open_out((base / "report.json").string()) << report.to_json().dump(2) << "\n";
  report.write_svg((base / "mape.svg").string());
  open_out((base / "metrics_table.txt").string())
      << report.metrics_table_text();

  json summary = {{"command", "run-plan"},
                  {"windows", report.windows.size()},
                  {"cells", report.cells.size()},
                  {"skipped_cells", report.skipped_cells},
                  {"leak_check_passed", report.leak_check_passed},
                  {"report_dir", report_dir}};
  std::ostringstream human;
  human << "ran " << report.cells.size() << " cells over "
        << report.windows.size() << " windows (" << report.skipped_cells
        << " skipped); leak check "
        << (report.leak_check_passed ? "passed" : "FAILED") << "\n\n"
        << report.metrics_table_text();
  emit(flags, summary, human.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fleet lifetime modeling and failure forecasting"};
  app.require_subcommand(1);

  CommonFlags flags;

  // generate
  auto* generate = app.add_subcommand("generate", "synthesize a fleet CSV");
  std::string gen_config, gen_out, gen_truth;
  std::optional<long long> gen_seed;
  generate->add_option("--config", gen_config, "fleet config file");
  generate->add_option("--out", gen_out, "output CSV")->required();
  generate->add_option("--truth", gen_truth, "ground-truth JSON output");
  generate->add_option("--seed", gen_seed, "generator seed");
  add_common(generate, flags);

  // clean
  auto* clean_cmd = app.add_subcommand("clean", "apply cleaning rules");
  std::string clean_in, clean_config, clean_out, clean_report;
  clean_cmd->add_option("--in", clean_in, "input CSV")->required();
  clean_cmd->add_option("--config", clean_config, "cleaning config file");
  clean_cmd->add_option("--out", clean_out, "cleaned CSV")->required();
  clean_cmd->add_option("--report", clean_report,
                        "report path prefix (.csv and .txt)");
  add_common(clean_cmd, flags);

  // fit
  auto* fit = app.add_subcommand("fit", "fit a survival model");
  std::string fit_model_name, fit_train, fit_out, fit_config, fit_t0;
  std::optional<long long> fit_seed;
  fit->add_option("--model", fit_model_name, "km|cox|gbcox|rsf|aft")
      ->required();
  fit->add_option("--train", fit_train, "training CSV")->required();
  fit->add_option("--out", fit_out, "model JSON output")->required();
  fit->add_option("--config", fit_config, "hyperparameter config file");
  fit->add_option("--t0", fit_t0, "restrict training data to state as of t0");
  fit->add_option("--seed", fit_seed, "fit seed (ensemble models)");
  add_common(fit, flags);

  // calibrate
  auto* calibrate =
      app.add_subcommand("calibrate", "fit an isotonic map on a past window");
  std::string cal_model, cal_data, cal_t0, cal_t1, cal_out;
  calibrate->add_option("--model", cal_model, "model JSON")->required();
  calibrate->add_option("--data", cal_data, "fleet CSV")->required();
  calibrate->add_option("--t0", cal_t0, "window start (resolved)")->required();
  calibrate->add_option("--t1", cal_t1, "window end (resolved)")->required();
  calibrate->add_option("--out", cal_out, "calibrated model JSON")->required();
  add_common(calibrate, flags);

  // forecast
  auto* forecast = app.add_subcommand("forecast", "expected window failures");
  std::string fc_model, fc_data, fc_t0, fc_t1, fc_out;
  forecast->add_option("--model", fc_model, "model JSON")->required();
  forecast->add_option("--data", fc_data, "fleet CSV")->required();
  forecast->add_option("--t0", fc_t0, "window start")->required();
  forecast->add_option("--t1", fc_t1, "window end")->required();
  forecast->add_option("--out", fc_out, "output prefix (.csv and .json)")
      ->required();
  add_common(forecast, flags);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "CI and IBS on a dataset");
  std::string ev_model, ev_data, ev_out;
  evaluate->add_option("--model", ev_model, "model JSON")->required();
  evaluate->add_option("--data", ev_data, "evaluation CSV")->required();
  evaluate->add_option("--out", ev_out, "metrics JSON output");
  evaluate->add_option("--mode", flags.brier_mode, "naive|ipcw (default ipcw)");
  add_common(evaluate, flags);

  // run-plan
  auto* plan = app.add_subcommand("run-plan", "full rolling-window protocol");
  std::string plan_path, plan_data, plan_truth, plan_report;
  std::optional<long long> plan_seed;
  plan->add_option("--plan", plan_path, "plan config file")->required();
  plan->add_option("--data", plan_data, "fleet CSV")->required();
  plan->add_option("--truth", plan_truth, "ground-truth JSON (synthetic runs)");
  plan->add_option("--report", plan_report, "report output directory")
      ->required();
  plan->add_option("--seed", plan_seed, "plan seed override");
  auto* plan_mode =
      plan->add_option("--mode", flags.brier_mode, "naive|ipcw Brier override");
  add_common(plan, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*generate)
      return run_generate(gen_config, gen_out, gen_truth, gen_seed, flags);
    if (*clean_cmd)
      return run_clean(clean_in, clean_config, clean_out, clean_report, flags);
    if (*fit)
      return run_fit(fit_model_name, fit_train, fit_out, fit_config, fit_t0,
                     fit_seed, flags);
    if (*calibrate)
      return run_calibrate(cal_model, cal_data, cal_t0, cal_t1, cal_out, flags);
    if (*forecast)
      return run_forecast(fc_model, fc_data, fc_t0, fc_t1, fc_out, flags);
    if (*evaluate) return run_evaluate(ev_model, ev_data, ev_out, flags);
    if (*plan)
      return run_plan_cmd(plan_path, plan_data, plan_truth, plan_report,
                          plan_seed, plan_mode->count() > 0, flags);
  } catch (const fleetlife::Error& e) {
    std::cerr << "fleetlife error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fleetlife internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
