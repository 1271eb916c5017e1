#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fleetlife/config.hpp"
#include "fleetlife/dataset.hpp"
#include "fleetlife/detail/csv.hpp"
#include "fleetlife/rng.hpp"
#include "fleetlife/types.hpp"

namespace fleetlife {

struct CovariateSpec {
  std::string name;
  bool categorical = false;
  double low = 0.0;   // continuous range
  double high = 1.0;
  std::vector<std::string> levels;  // categorical levels
  std::vector<double> beta;         // one value, or one per level
  bool is_usage_rate = false;       // continuous only: doubles as hours/day
};

// Synthetic fleet with known ground truth: lifetimes follow
// ln T = intercept + x*beta + sigma*eps with Gumbel-minimum eps; staggered
// installs plus a single snapshot date produce administrative censoring.
struct FleetConfig {
  int n_subjects = 10000;
  double true_intercept = 8.3;  // ln-hours
  double true_sigma = 0.45;
  double target_censoring_rate = 0.7;
  std::vector<CovariateSpec> covariates;
  double doa_fraction = 0.0;
  double storage_delay_fraction = 0.0;
  double noise_scale = 0.0;  // multiplicative log-normal on logged covariates
  double usage_rate_low = 4.0;   // hours/day fallback when no covariate is
  double usage_rate_high = 10.0; // flagged as the usage rate
  Date install_start = make_date(2009, 1, 1);
  Date install_end = make_date(2018, 12, 31);
  double doa_max_time = 100.0;
  double storage_flag_years = 1.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_subjects < 10) throw ParameterError("fleet: n_subjects must be >= 10");
    if (!(true_sigma > 0.0)) throw ParameterError("fleet: sigma must be > 0");
    if (!(target_censoring_rate > 0.0 && target_censoring_rate < 1.0))
      throw ParameterError("fleet: target censoring must be in (0,1)");
    if (doa_fraction < 0.0 || doa_fraction >= 1.0)
      throw ParameterError("fleet: doa_fraction must be in [0,1)");
    if (storage_delay_fraction < 0.0 || storage_delay_fraction >= 1.0)
      throw ParameterError("fleet: storage_delay_fraction must be in [0,1)");
    if (noise_scale < 0.0) throw ParameterError("fleet: noise_scale >= 0");
    if (!(usage_rate_low > 0.0 && usage_rate_high >= usage_rate_low))
      throw ParameterError("fleet: bad usage rate range");
    if (install_end < install_start)
      throw ParameterError("fleet: install window reversed");
    if (!(doa_max_time > 0.0)) throw ParameterError("fleet: doa_max_time > 0");
    int rate_covariates = 0;
    for (const auto& c : covariates) {
      if (c.name.empty()) throw ParameterError("fleet: unnamed covariate");
      if (c.categorical) {
        if (c.levels.size() < 2)
          throw ParameterError("fleet: categorical \"" + c.name +
                               "\" needs >= 2 levels");
        if (c.beta.size() != c.levels.size())
          throw ParameterError("fleet: beta width mismatch for \"" + c.name +
                               "\"");
        if (c.is_usage_rate)
          throw ParameterError("fleet: usage rate covariate must be continuous");
      } else {
        if (!(c.high > c.low))
          throw ParameterError("fleet: empty range for \"" + c.name + "\"");
        if (c.beta.size() != 1)
          throw ParameterError("fleet: continuous \"" + c.name +
                               "\" needs exactly one beta");
        if (c.is_usage_rate) {
          ++rate_covariates;
          if (!(c.low > 0.0))
            throw ParameterError("fleet: usage rate covariate must be positive");
        }
      }
    }
    if (rate_covariates > 1)
      throw ParameterError("fleet: at most one usage rate covariate");
  }

  // Canonical fleet: usage intensity drives the calendar clock and slightly
  // shortens hour-lifetimes, ink throughput is the dominant covariate,
  // position/color carry mild effects.
  static FleetConfig default_fleet() {
    FleetConfig cfg;
    cfg.covariates = {
        {"warm_hours_per_day", false, 4.0, 12.0, {}, {-0.04}, true},
        {"ink_g_per_khour", false, 10.0, 30.0, {}, {0.12}, false},
        {"position",
         true,
         0.0,
         1.0,
         {"front", "center", "rear"},
         {0.0, 0.03, -0.03},
         false},
        {"color", true, 0.0, 1.0, {"K", "C", "M", "Y"},
         {0.0, -0.05, 0.05, 0.1}, false},
    };
    return cfg;
  }

  // covariate.<name> = continuous,<low>,<high>,beta=<b>[,rate]
  // covariate.<name> = categorical,<l1>|<l2>|...,beta=<b1>|<b2>|...
  // plus scalar keys; covariate_order fixes the column order (default:
  // alphabetical by name).
  static FleetConfig from_config(const Config& cfg) {
    FleetConfig out = default_fleet();
    out.n_subjects =
        static_cast<int>(cfg.get_int("n_subjects", out.n_subjects));
    out.true_intercept = cfg.get_double("intercept", out.true_intercept);
    out.true_sigma = cfg.get_double("sigma", out.true_sigma);
    out.target_censoring_rate =
        cfg.get_double("target_censoring_rate", out.target_censoring_rate);
    out.doa_fraction = cfg.get_double("doa_fraction", out.doa_fraction);
    out.storage_delay_fraction =
        cfg.get_double("storage_delay_fraction", out.storage_delay_fraction);
    out.noise_scale = cfg.get_double("noise_scale", out.noise_scale);
    out.usage_rate_low = cfg.get_double("usage_rate_low", out.usage_rate_low);
    out.usage_rate_high = cfg.get_double("usage_rate_high", out.usage_rate_high);
    out.install_start = cfg.get_date("install_start", out.install_start);
    out.install_end = cfg.get_date("install_end", out.install_end);
    out.doa_max_time = cfg.get_double("doa_max_time", out.doa_max_time);
    out.storage_flag_years =
        cfg.get_double("storage_flag_years", out.storage_flag_years);
    out.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));

    const std::string prefix = "covariate.";
    std::map<std::string, CovariateSpec> specs;
    for (const auto& [key, value] : cfg.entries()) {
      if (key.rfind(prefix, 0) != 0) continue;
      CovariateSpec spec;
      spec.name = key.substr(prefix.size());
      std::vector<std::string> tokens;
      {
        std::string token;
        std::istringstream in(value);
        while (std::getline(in, token, ',')) {
          const auto b = token.find_first_not_of(" \t");
          const auto e = token.find_last_not_of(" \t");
          tokens.push_back(b == std::string::npos
                               ? std::string{}
                               : token.substr(b, e - b + 1));
        }
      }
      if (tokens.empty())
        throw ParameterError("fleet config: empty covariate spec for " +
                             spec.name);
      auto split_bar = [](const std::string& s) {
        std::vector<std::string> parts;
        std::string part;
        std::istringstream in(s);
        while (std::getline(in, part, '|')) parts.push_back(part);
        return parts;
      };
      if (tokens[0] == "categorical") {
        spec.categorical = true;
        if (tokens.size() < 3)
          throw ParameterError("fleet config: categorical covariate needs "
                               "levels and betas");
        spec.levels = split_bar(tokens[1]);
        for (std::size_t i = 2; i < tokens.size(); ++i) {
          if (tokens[i].rfind("beta=", 0) == 0) {
            for (const auto& b : split_bar(tokens[i].substr(5)))
              spec.beta.push_back(std::strtod(b.c_str(), nullptr));
          }
        }
      } else if (tokens[0] == "continuous") {
        if (tokens.size() < 4)
          throw ParameterError(
              "fleet config: continuous covariate needs low, high, beta");
        spec.low = std::strtod(tokens[1].c_str(), nullptr);
        spec.high = std::strtod(tokens[2].c_str(), nullptr);
        for (std::size_t i = 3; i < tokens.size(); ++i) {
          if (tokens[i].rfind("beta=", 0) == 0)
            spec.beta.push_back(std::strtod(tokens[i].substr(5).c_str(),
                                            nullptr));
          else if (tokens[i] == "rate")
            spec.is_usage_rate = true;
        }
      } else {
        throw ParameterError("fleet config: covariate kind must be "
                             "continuous or categorical");
      }
      specs[spec.name] = std::move(spec);
    }
    if (!specs.empty()) {
      out.covariates.clear();
      if (cfg.has("covariate_order")) {
        for (const auto& name : cfg.get_list("covariate_order")) {
          auto it = specs.find(name);
          if (it == specs.end())
            throw ParameterError("fleet config: covariate_order names unknown "
                                 "covariate \"" + name + "\"");
          out.covariates.push_back(it->second);
        }
      } else {
        for (const auto& [name, spec] : specs) out.covariates.push_back(spec);
      }
    }
    out.validate();
    return out;
  }
};

struct GroundTruthSubject {
  std::string id;
  double lifetime_hours = 0.0;  // true, uncensored
  double usage_rate = 0.0;      // hours per calendar day
  Date install{};
  double failure_day = 0.0;  // real-valued days since epoch
  bool censored_in_data = false;
};

struct GroundTruth {
  double intercept = 0.0;
  double sigma = 1.0;
  std::map<std::string, double> beta_by_feature;
  std::vector<GroundTruthSubject> subjects;
  Date snapshot{};
  double achieved_censoring = 0.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    nlohmann::json subjects_json = nlohmann::json::array();
    for (const auto& s : subjects) {
      subjects_json.push_back({{"id", s.id},
                               {"lifetime_hours", s.lifetime_hours},
                               {"usage_rate", s.usage_rate},
                               {"install_date", to_string(s.install)},
                               {"failure_day", s.failure_day},
                               {"censored", s.censored_in_data}});
    }
    return {{"format_version", 1},
            {"intercept", intercept},
            {"sigma", sigma},
            {"beta", beta_by_feature},
            {"snapshot", to_string(snapshot)},
            {"achieved_censoring", achieved_censoring},
            {"seed", seed},
            {"subjects", subjects_json}};
  }

  static GroundTruth from_json(const nlohmann::json& j) {
    GroundTruth gt;
    gt.intercept = j.at("intercept").get<double>();
    gt.sigma = j.at("sigma").get<double>();
    for (const auto& [name, v] : j.at("beta").items())
      gt.beta_by_feature[name] = v.get<double>();
    gt.snapshot = parse_date(j.at("snapshot").get<std::string>());
    gt.achieved_censoring = j.at("achieved_censoring").get<double>();
    gt.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("subjects")) {
      GroundTruthSubject sub;
      sub.id = s.at("id").get<std::string>();
      sub.lifetime_hours = s.at("lifetime_hours").get<double>();
      sub.usage_rate = s.at("usage_rate").get<double>();
      sub.install = parse_date(s.at("install_date").get<std::string>());
      sub.failure_day = s.at("failure_day").get<double>();
      sub.censored_in_data = s.at("censored").get<bool>();
      gt.subjects.push_back(std::move(sub));
    }
    return gt;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write \"" + path + "\"");
    out << to_json().dump(2) << "\n";
  }

  static GroundTruth load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open \"" + path + "\"");
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

inline std::pair<Dataset, GroundTruth> generate_fleet(const FleetConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t n = static_cast<std::size_t>(cfg.n_subjects);

  struct Draw {
    std::vector<double> continuous;            // true values
    std::vector<double> logged;                // with logging noise
    std::vector<std::size_t> category_choice;  // per categorical covariate
    double rate = 0.0;
    Date install{}, production{};
    bool doa = false;
    double lifetime = 0.0;
    double failure_day = 0.0;
  };
  std::vector<Draw> draws(n);

  for (auto& d : draws) {
    double lp = cfg.true_intercept;
    for (const auto& c : cfg.covariates) {
      if (c.categorical) {
        const auto pick = static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<std::int64_t>(c.levels.size()) - 1));
        d.category_choice.push_back(pick);
        lp += c.beta[pick];
      } else {
        const double v = rng.uniform(c.low, c.high);
        d.continuous.push_back(v);
        lp += c.beta[0] * v;
        if (c.is_usage_rate) d.rate = v;
      }
    }
    if (!(d.rate > 0.0))
      d.rate = rng.uniform(cfg.usage_rate_low, cfg.usage_rate_high);

    d.logged = d.continuous;
    if (cfg.noise_scale > 0.0) {
      for (auto& v : d.logged) v *= std::exp(cfg.noise_scale * rng.normal());
    }

    d.install = Date{static_cast<int>(
        rng.uniform_int(cfg.install_start.days, cfg.install_end.days))};
    const double storage_days = cfg.storage_flag_years * 365.25;
    const bool delayed = rng.uniform() < cfg.storage_delay_fraction;
    const double gap = delayed ? rng.uniform(storage_days * 1.07, storage_days * 2.0)
                               : rng.uniform(5.0, storage_days * 0.6);
    d.production = add_days(d.install, -static_cast<int>(std::ceil(gap)));

    d.doa = rng.uniform() < cfg.doa_fraction;
    if (d.doa) {
      d.lifetime = rng.uniform(1.0, 0.8 * cfg.doa_max_time);
    } else {
      d.lifetime = std::exp(lp + cfg.true_sigma * rng.gumbel_min());
    }
    d.failure_day = d.install.days + d.lifetime / d.rate;
  }

  // Snapshot tuned so that the target share of failure days lands beyond it,
  // clamped to keep every install inside the observation period.
  std::vector<double> fail_days;
  fail_days.reserve(n);
  int max_install = cfg.install_start.days;
  for (const auto& d : draws) {
    fail_days.push_back(d.failure_day);
    max_install = std::max(max_install, d.install.days);
  }
  std::sort(fail_days.begin(), fail_days.end());
  const auto k = static_cast<std::size_t>(std::llround(
      (1.0 - cfg.target_censoring_rate) * static_cast<double>(n)));
  double snapshot_day;
  if (k == 0) {
    snapshot_day = fail_days.front() - 1.0;
  } else if (k >= n) {
    snapshot_day = fail_days.back() + 1.0;
  } else {
    snapshot_day = 0.5 * (fail_days[k - 1] + fail_days[k]);
  }
  // every subject must be installed by the snapshot; sub-day lifetimes make
  // fractional snapshot positions meaningful
  snapshot_day = std::max(snapshot_day, static_cast<double>(max_install));

  std::size_t censored = 0;
  for (const auto& d : draws)
    if (d.failure_day > snapshot_day) ++censored;
  const double achieved = static_cast<double>(censored) / static_cast<double>(n);
  if (std::abs(achieved - cfg.target_censoring_rate) > 0.03) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "fleet: censoring target %.3f unattainable with this install "
                  "window; achieved %.3f",
                  cfg.target_censoring_rate, achieved);
    throw Error(buf);
  }
  const Date snapshot{static_cast<int>(std::floor(snapshot_day))};

  // Emit CSV rows and build the dataset through the same parser the loader
  // uses, so generate -> save -> load round-trips bit-exactly.
  detail::CsvTable table;
  table.header = {"id"};
  for (const auto& c : cfg.covariates) table.header.push_back(c.name);
  table.header.insert(table.header.end(),
                      {"observed_time", "event", "production_date",
                       "install_date", "last_log_date"});

  GroundTruth gt;
  gt.intercept = cfg.true_intercept;
  gt.sigma = cfg.true_sigma;
  gt.seed = cfg.seed;
  gt.snapshot = snapshot;
  gt.achieved_censoring = achieved;
  for (const auto& c : cfg.covariates) {
    if (c.categorical) {
      for (std::size_t l = 0; l < c.levels.size(); ++l)
        gt.beta_by_feature[c.name + "=" + c.levels[l]] = c.beta[l];
    } else {
      gt.beta_by_feature[c.name] = c.beta[0];
    }
  }

  char id_buf[24];
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = draws[i];
    std::snprintf(id_buf, sizeof(id_buf), "ph-%06zu", i + 1);

    const bool is_censored = d.failure_day > snapshot_day;
    double observed;
    Date last_log;
    if (is_censored) {
      observed = d.rate * (snapshot_day - d.install.days);
      last_log = snapshot;
    } else {
      observed = d.lifetime;
      last_log = Date{std::max(static_cast<int>(std::floor(d.failure_day)),
                               d.install.days)};
    }

    std::vector<std::string> row = {id_buf};
    std::size_t cont = 0, cat = 0;
    for (const auto& c : cfg.covariates) {
      if (c.categorical) {
        row.push_back(c.levels[d.category_choice[cat++]]);
      } else {
        row.push_back(detail::format_double(d.logged[cont++]));
      }
    }
    row.push_back(detail::format_double(observed));
    row.push_back(is_censored ? "0" : "1");
    row.push_back(to_string(d.production));
    row.push_back(to_string(d.install));
    row.push_back(to_string(last_log));
    table.rows.push_back(std::move(row));

    gt.subjects.push_back({id_buf, d.lifetime, d.rate, d.install,
                           d.failure_day, is_censored});
  }

  Dataset ds = dataset_from_table(table);
  return {std::move(ds), std::move(gt)};
}

// Exact count of subjects at risk at t0 whose true lifetime ends in (t0, t1].
inline int true_window_failures(const GroundTruth& gt,
                                const PredictionWindow& w) {
  w.validate();
  int count = 0;
  for (const auto& s : gt.subjects) {
    if (s.install.days > w.t0.days) continue;          // not installed yet
    if (s.failure_day <= w.t0.days) continue;          // already failed
    if (s.failure_day <= w.t1.days) ++count;           // fails in the window
  }
  return count;
}

}  // namespace fleetlife
