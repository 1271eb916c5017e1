// Minimal tour: build a tiny dataset by hand, fit KM and Cox, and turn the
// predicted curves into window failure probabilities.

#include <iostream>

#include "fleetlife/fleetlife.hpp"

using namespace fleetlife;

int main() {
  Dataset ds;
  ds.feature_names = {"load"};
  const Date prod = make_date(2020, 1, 1);
  const Date inst = make_date(2020, 2, 1);
  struct Row {
    const char* id;
    double load, hours;
    int event;
    int log_offset_days;
  };
  const Row rows[] = {
      {"a", 0.9, 1200, 1, 200}, {"b", 0.4, 1700, 1, 420},
      {"c", 0.3, 1800, 1, 300}, {"d", 0.2, 3100, 0, 500},
      {"e", 0.8, 2200, 1, 380}, {"f", 0.1, 2500, 1, 560},
      {"g", 0.6, 1500, 1, 260}, {"h", 0.7, 2900, 0, 480},
  };
  for (const auto& r : rows) {
    SurvivalRecord rec;
    rec.id = r.id;
    rec.features = {r.load};
    rec.observed_time = r.hours;
    rec.event = r.event;
    rec.production_date = prod;
    rec.install_date = inst;
    rec.last_log_date = add_days(inst, r.log_offset_days);
    ds.records.push_back(rec);
  }

  const auto km = fit_kaplan_meier(ds);
  std::cout << "KM S(2000h) = " << km.curve.value_at(2000) << "\n";

  const auto cox = fit_cox(ds);
  std::cout << "Cox beta[load] = " << cox.beta[0] << " ("
            << cox.iterations << " iterations)\n";

  const std::vector<double> heavy = {0.85};
  const auto curve = cox.predict_survival(heavy);
  const double p = window_failure_probability(curve, 1000, 2000);
  std::cout << "P(fail in (1000h, 2000h] | alive at 1000h, load 0.85) = " << p
            << "\n";
  return 0;
}
