#pragma once

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fleetlife/config.hpp"
#include "fleetlife/detail/csv.hpp"
#include "fleetlife/types.hpp"

namespace fleetlife {

// Column mapping for fleet snapshot CSVs. With auto_features on, every
// column outside the required six is typed by inspection: numeric when all
// non-missing values parse as numbers, categorical otherwise. Categorical
// columns expand to one-hot features named "column=level", levels ordered by
// first appearance in the file.
struct CsvSchema {
  std::string id_column = "id";
  std::string time_column = "observed_time";
  std::string event_column = "event";
  std::string production_column = "production_date";
  std::string install_column = "install_date";
  std::string last_log_column = "last_log_date";

  bool auto_features = true;
  std::vector<std::string> numeric_features;      // used when auto_features off
  std::vector<std::string> categorical_features;  // used when auto_features off

  // Rows with missing optional covariates are dropped unless set, in which
  // case numeric gaps take the column mean of the kept rows.
  bool impute_missing = false;

  std::string storage_flag_feature = "storage_flag";
};

namespace detail {

inline bool parse_double_strict(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end != s.c_str() && *end == '\0' && std::isfinite(out);
}

inline std::optional<std::size_t> column_index(
    const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

}  // namespace detail

// Shared by load_csv and the synthetic generator so a generated dataset and
// its CSV round-trip are built by the same code path.
inline Dataset dataset_from_table(const detail::CsvTable& table,
                                  const CsvSchema& schema = {}) {
  if (table.header.empty()) throw EmptyInputError("csv has no header row");
  if (table.rows.empty()) throw EmptyInputError("csv has no data rows");

  auto require = [&](const std::string& name) {
    auto idx = detail::column_index(table.header, name);
    if (!idx) throw SchemaError("missing required column \"" + name + "\"");
    return *idx;
  };
  const std::size_t c_id = require(schema.id_column);
  const std::size_t c_time = require(schema.time_column);
  const std::size_t c_event = require(schema.event_column);
  const std::size_t c_prod = require(schema.production_column);
  const std::size_t c_inst = require(schema.install_column);
  const std::size_t c_log = require(schema.last_log_column);

  const std::set<std::size_t> reserved = {c_id, c_time, c_event,
                                          c_prod, c_inst, c_log};

  // Decide feature columns and their kinds.
  std::vector<std::size_t> numeric_cols, categorical_cols;
  if (schema.auto_features) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (reserved.count(c)) continue;
      bool numeric = true;
      for (const auto& row : table.rows) {
        if (c >= row.size() || row[c].empty()) continue;
        double v;
        if (!detail::parse_double_strict(row[c], v)) {
          numeric = false;
          break;
        }
      }
      (numeric ? numeric_cols : categorical_cols).push_back(c);
    }
  } else {
    for (const auto& name : schema.numeric_features)
      numeric_cols.push_back(require(name));
    for (const auto& name : schema.categorical_features)
      categorical_cols.push_back(require(name));
  }

  struct BadRow {
    int row;
    std::string what;
  };
  std::vector<BadRow> bad;
  std::vector<int> dropped;

  // First pass: validate required fields, find missing covariates, and
  // discover categorical levels over the rows that will be kept.
  std::vector<bool> keep(table.rows.size(), true);
  std::map<std::size_t, std::vector<std::string>> levels;  // col -> levels
  for (auto c : categorical_cols) levels[c] = {};

  auto cell = [&](const std::vector<std::string>& row, std::size_t c)
      -> const std::string& {
    static const std::string empty;
    return c < row.size() ? row[c] : empty;
  };

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int row_no = static_cast<int>(r) + 1;
    auto reject = [&](const std::string& what) {
      bad.push_back({row_no, what});
      keep[r] = false;
    };

    if (cell(row, c_id).empty()) {
      reject("empty id");
      continue;
    }
    double t;
    if (!detail::parse_double_strict(cell(row, c_time), t) || t < 0.0) {
      reject("bad " + schema.time_column);
      continue;
    }
    const std::string& ev = cell(row, c_event);
    if (ev != "0" && ev != "1") {
      reject("event must be 0 or 1, got \"" + ev + "\"");
      continue;
    }
    Date prod, inst, log;
    try {
      prod = parse_date(cell(row, c_prod));
      inst = parse_date(cell(row, c_inst));
      log = parse_date(cell(row, c_log));
    } catch (const ParseError& e) {
      reject(e.what());
      continue;
    }
    if (inst < prod || log < inst) {
      reject("dates out of order");
      continue;
    }

    // Missing optional covariates drop the row (or impute later).
    bool missing = false;
    for (auto c : numeric_cols) {
      if (cell(row, c).empty()) missing = true;
    }
    for (auto c : categorical_cols) {
      if (cell(row, c).empty()) missing = true;
    }
    if (missing && !schema.impute_missing) {
      keep[r] = false;
      dropped.push_back(row_no);
      continue;
    }
    for (auto c : categorical_cols) {
      const std::string& v = cell(row, c);
      if (v.empty()) continue;
      auto& ls = levels[c];
      if (std::find(ls.begin(), ls.end(), v) == ls.end()) ls.push_back(v);
    }
  }

  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "rejected " << bad.size() << " row(s): ";
    for (std::size_t i = 0; i < bad.size(); ++i) {
      if (i) msg << "; ";
      msg << "row " << bad[i].row << " (" << bad[i].what << ")";
    }
    throw ParseError(msg.str());
  }

  // Column means for imputation.
  std::map<std::size_t, double> means;
  if (schema.impute_missing) {
    for (auto c : numeric_cols) {
      double sum = 0.0;
      int n = 0;
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (!keep[r]) continue;
        const std::string& v = cell(table.rows[r], c);
        if (v.empty()) continue;
        double x;
        detail::parse_double_strict(v, x);
        sum += x;
        ++n;
      }
      if (n == 0)
        throw DomainError("column \"" + table.header[c] +
                          "\" has no values to impute from");
      means[c] = sum / n;
    }
  }

  Dataset ds;
  ds.dropped_rows = dropped;
  for (auto c : numeric_cols) ds.feature_names.push_back(table.header[c]);
  for (auto c : categorical_cols) {
    for (const auto& level : levels[c])
      ds.feature_names.push_back(table.header[c] + "=" + level);
  }
  bool has_storage = false;
  for (const auto& name : ds.feature_names)
    if (name == schema.storage_flag_feature) has_storage = true;
  if (!has_storage) ds.feature_names.push_back(schema.storage_flag_feature);

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (!keep[r]) continue;
    const auto& row = table.rows[r];
    SurvivalRecord rec;
    rec.id = cell(row, c_id);
    detail::parse_double_strict(cell(row, c_time), rec.observed_time);
    rec.event = cell(row, c_event) == "1" ? 1 : 0;
    rec.production_date = parse_date(cell(row, c_prod));
    rec.install_date = parse_date(cell(row, c_inst));
    rec.last_log_date = parse_date(cell(row, c_log));

    for (auto c : numeric_cols) {
      const std::string& v = cell(row, c);
      double x;
      if (v.empty()) {
        x = means.at(c);
      } else {
        detail::parse_double_strict(v, x);
      }
      rec.features.push_back(x);
    }
    for (auto c : categorical_cols) {
      const std::string& v = cell(row, c);
      for (const auto& level : levels[c])
        rec.features.push_back(v == level ? 1.0 : 0.0);
    }
    if (!has_storage) rec.features.push_back(0.0);
    ds.records.push_back(std::move(rec));
  }

  if (ds.records.empty())
    throw EmptyInputError("no usable rows after dropping incomplete ones");
  ds.validate();
  return ds;
}

inline Dataset load_csv(const std::string& path, const CsvSchema& schema = {}) {
  return dataset_from_table(detail::read_csv_file(path), schema);
}

// Writes expanded feature columns (one column per feature name); the result
// loads back with the default auto-typed schema.
inline void write_dataset_csv(const Dataset& ds, const std::string& path,
                              const CsvSchema& schema = {}) {
  std::vector<std::string> header = {schema.id_column};
  for (const auto& f : ds.feature_names) header.push_back(f);
  header.push_back(schema.time_column);
  header.push_back(schema.event_column);
  header.push_back(schema.production_column);
  header.push_back(schema.install_column);
  header.push_back(schema.last_log_column);

  std::vector<std::vector<std::string>> rows;
  rows.reserve(ds.records.size());
  for (const auto& r : ds.records) {
    std::vector<std::string> row = {r.id};
    for (double v : r.features) row.push_back(detail::format_double(v));
    row.push_back(detail::format_double(r.observed_time));
    row.push_back(r.event ? "1" : "0");
    row.push_back(to_string(r.production_date));
    row.push_back(to_string(r.install_date));
    row.push_back(to_string(r.last_log_date));
    rows.push_back(std::move(row));
  }
  detail::write_csv_file(path, header, rows);
}

// Expert-threshold cleaning rules.
struct CleaningConfig {
  std::map<std::string, double> max_usage_thresholds;  // feature -> max value
  double max_daily_hours = 12.0;
  double storage_flag_years = 1.5;
  double doa_max_time = 100.0;  // hours; early failures below this are DOA

  void validate() const {
    for (const auto& [name, v] : max_usage_thresholds) {
      if (!(v > 0.0))
        throw ParameterError("usage threshold for \"" + name +
                             "\" must be positive");
    }
    if (!(max_daily_hours > 0.0))
      throw ParameterError("max_daily_hours must be positive");
    if (!(storage_flag_years > 0.0))
      throw ParameterError("storage_flag_years must be positive");
    if (!(doa_max_time > 0.0))
      throw ParameterError("doa_max_time must be positive");
  }

  // Keys: max_daily_hours, storage_flag_years, doa_max_time, and
  // max_usage.<feature> entries.
  static CleaningConfig from_config(const Config& cfg) {
    CleaningConfig out;
    out.max_daily_hours = cfg.get_double("max_daily_hours", out.max_daily_hours);
    out.storage_flag_years =
        cfg.get_double("storage_flag_years", out.storage_flag_years);
    out.doa_max_time = cfg.get_double("doa_max_time", out.doa_max_time);
    const std::string prefix = "max_usage.";
    for (const auto& [key, value] : cfg.entries()) {
      if (key.rfind(prefix, 0) == 0) {
        out.max_usage_thresholds[key.substr(prefix.size())] =
            cfg.get_double(key);
      }
    }
    out.validate();
    return out;
  }
};

struct CleaningReport {
  std::map<std::string, int> removed;  // rule -> count
  int flagged_storage = 0;
  int input_records = 0;
  int kept_records = 0;

  int total_removed() const {
    int n = 0;
    for (const auto& [rule, c] : removed) n += c;
    return n;
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "cleaning report\n";
    out << "  input records:  " << input_records << "\n";
    out << "  kept records:   " << kept_records << "\n";
    for (const auto& [rule, c] : removed)
      out << "  removed (" << rule << "): " << c << "\n";
    out << "  flagged storage delay: " << flagged_storage << "\n";
    return out.str();
  }

  void write_csv(const std::string& path) const {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"input_records", std::to_string(input_records)});
    rows.push_back({"kept_records", std::to_string(kept_records)});
    for (const auto& [rule, c] : removed)
      rows.push_back({"removed." + rule, std::to_string(c)});
    rows.push_back({"flagged_storage", std::to_string(flagged_storage)});
    detail::write_csv_file(path, {"key", "value"}, rows);
  }
};

// Average active hours per calendar day between install and last log; spans
// shorter than one day count as one day.
inline double average_daily_hours(const SurvivalRecord& r) {
  const int days = days_between(r.install_date, r.last_log_date);
  return r.observed_time / std::max(days, 1);
}

// Applies removal rules in a fixed order (usage thresholds by feature name,
// daily-hours, dead-on-arrival); each removed record is counted under the
// first rule it trips. Storage-delayed records are flagged, not removed.
inline std::pair<Dataset, CleaningReport> clean(const Dataset& ds,
                                                const CleaningConfig& cfg) {
  cfg.validate();
  CleaningReport report;
  report.input_records = static_cast<int>(ds.size());
  for (const auto& [name, v] : cfg.max_usage_thresholds)
    report.removed["usage:" + name] = 0;
  report.removed["daily_hours"] = 0;
  report.removed["doa"] = 0;

  std::vector<std::pair<std::size_t, double>> thresholds;  // feature idx, max
  for (const auto& [name, v] : cfg.max_usage_thresholds) {
    auto idx = ds.feature_index(name);
    if (!idx)
      throw ParameterError("usage threshold names unknown feature \"" + name +
                           "\"");
    thresholds.emplace_back(*idx, v);
  }

  Dataset out;
  out.feature_names = ds.feature_names;
  auto flag_idx = out.feature_index("storage_flag");
  if (!flag_idx) {
    out.feature_names.push_back("storage_flag");
    flag_idx = out.feature_names.size() - 1;
  }
  const double storage_days = cfg.storage_flag_years * 365.25;

  for (const auto& rec : ds.records) {
    std::string removed_by;
    for (const auto& [idx, vmax] : thresholds) {
      if (rec.features[idx] > vmax) {
        removed_by = "usage:" + ds.feature_names[idx];
        break;
      }
    }
    if (removed_by.empty() && average_daily_hours(rec) > cfg.max_daily_hours)
      removed_by = "daily_hours";
    if (removed_by.empty() && rec.event == 1 &&
        rec.observed_time < cfg.doa_max_time)
      removed_by = "doa";

    if (!removed_by.empty()) {
      ++report.removed[removed_by];
      continue;
    }

    SurvivalRecord kept = rec;
    if (kept.features.size() < out.feature_names.size())
      kept.features.resize(out.feature_names.size(), 0.0);
    const int gap = days_between(kept.production_date, kept.install_date);
    if (static_cast<double>(gap) > storage_days) {
      kept.features[*flag_idx] = 1.0;
      ++report.flagged_storage;
    }
    out.records.push_back(std::move(kept));
  }

  if (out.records.empty())
    throw EmptyInputError("cleaning removed every record");
  report.kept_records = static_cast<int>(out.size());
  out.validate();
  return {std::move(out), report};
}

// Operational exposure accumulated by calendar date t, assuming usage accrues
// linearly between install and last log.
inline double exposure_at(const SurvivalRecord& r, Date t) {
  if (t <= r.install_date) return 0.0;
  if (t >= r.last_log_date) return r.observed_time;
  const int span = days_between(r.install_date, r.last_log_date);
  if (span <= 0) return r.observed_time;
  return r.observed_time * days_between(r.install_date, t) / span;
}

// Historical average usage rate, hours per calendar day in service.
inline double usage_rate(const SurvivalRecord& r) {
  const int days = days_between(r.install_date, r.last_log_date);
  return r.observed_time / std::max(days, 1);
}

inline bool alive_at(const SurvivalRecord& r, Date t) {
  if (t < r.install_date) return false;
  return r.event == 1 ? r.last_log_date > t : r.last_log_date >= t;
}

// Subjects alive (installed, unresolved) at the cutoff.
inline Dataset at_risk_at(const Dataset& ds, Date t0) {
  Dataset out;
  out.feature_names = ds.feature_names;
  for (const auto& r : ds.records) {
    if (alive_at(r, t0)) out.records.push_back(r);
  }
  return out;
}

// Splits a fleet snapshot at a prediction window. The train part holds each
// record's state as of t0: outcomes resolved by t0 pass through, subjects
// still alive at t0 are re-censored at their t0 exposure. The truth part
// holds the window outcome for every subject at risk at t0: event=1 when the
// failure lands in (t0, t1]; survivors are censored at t1; subjects whose
// data ends inside the window keep last_log_date < t1 so downstream code can
// tell them apart from survivors.
inline std::pair<Dataset, Dataset> restrict_to_window(
    const Dataset& ds, const PredictionWindow& w) {
  w.validate();
  Dataset train, truth;
  train.feature_names = ds.feature_names;
  truth.feature_names = ds.feature_names;

  for (const auto& rec : ds.records) {
    if (rec.install_date > w.t0) continue;  // not in the fleet yet

    if (!alive_at(rec, w.t0)) {
      // Resolved (failed) or lost (censored) by t0; state passes through.
      train.records.push_back(rec);
      continue;
    }

    SurvivalRecord tr = rec;
    tr.event = 0;
    tr.observed_time = exposure_at(rec, w.t0);
    tr.last_log_date = w.t0;
    train.records.push_back(std::move(tr));

    SurvivalRecord th = rec;
    if (rec.event == 1 && rec.last_log_date <= w.t1) {
      // failure inside the window; keep true resolution
    } else if (rec.last_log_date >= w.t1) {
      th.event = 0;
      th.observed_time = exposure_at(rec, w.t1);
      th.last_log_date = w.t1;
    } else {
      th.event = 0;  // censored mid-window; status at t1 unknown
    }
    truth.records.push_back(std::move(th));
  }

  if (train.records.empty())
    throw EmptyInputError("no records observed by t0 = " + to_string(w.t0));
  if (truth.records.empty())
    throw EmptyRiskSetError("no subjects at risk at t0 = " + to_string(w.t0));
  return {std::move(train), std::move(truth)};
}

}  // namespace fleetlife
