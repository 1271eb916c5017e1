#include <gtest/gtest.h>

#include <random>

#include "fleetlife/forecast.hpp"
#include "fleetlife/model.hpp"
#include "test_support.hpp"

using namespace fleetlife;

namespace {

SurvivalCurve step_curve(std::vector<double> times, std::vector<double> probs) {
  SurvivalCurve c;
  c.times = std::move(times);
  c.probs = std::move(probs);
  return c;
}

SurvivalCurve random_curve(std::mt19937_64& gen, int steps = 8) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SurvivalCurve c;
  double t = 0.0, s = 1.0;
  for (int k = 0; k < steps; ++k) {
    t += 0.5 + unif(gen) * 3.0;
    s *= 0.4 + 0.6 * unif(gen);  // keep strictly positive
    c.times.push_back(t);
    c.probs.push_back(s);
  }
  return c;
}

}  // namespace

TEST(ConditionalSurvival, CoreCases) {
  const auto c = step_curve({10, 20}, {0.8, 0.6});
  EXPECT_DOUBLE_EQ(conditional_survival(c, 15, 15), 1.0);
  EXPECT_DOUBLE_EQ(conditional_survival(c, 15, 25), 0.6 / 0.8);
  // i = 0 with S(0) = 1 reduces to plain S(j)
  EXPECT_DOUBLE_EQ(conditional_survival(c, 0, 15), 0.8);
}

TEST(ConditionalSurvival, ErrorContracts) {
  const auto c = step_curve({10, 20}, {0.5, 0.0});
  try {
    conditional_survival(c, 25, 30);  // S(25) = 0
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("impossible"), std::string::npos);
  }
  try {
    conditional_survival(c, 12, 5);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("order"), std::string::npos);
  }
  EXPECT_THROW(conditional_survival(c, -1, 5), DomainError);
}

TEST(ConditionalSurvival, ChainRuleProperty) {
  std::mt19937_64 gen(431);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_curve(gen);
    const double span = c.times.back() * 1.2;
    double ts[3] = {unif(gen) * span, unif(gen) * span, unif(gen) * span};
    std::sort(std::begin(ts), std::end(ts));
    const double whole = conditional_survival(c, ts[0], ts[2]);
    const double left = conditional_survival(c, ts[0], ts[1]);
    const double right = conditional_survival(c, ts[1], ts[2]);
    EXPECT_NEAR(whole, left * right, 1e-12);
  }
}

TEST(WindowFailureProbability, ComplementAndCalibration) {
  const auto c = step_curve({10, 20}, {0.8, 0.6});
  EXPECT_DOUBLE_EQ(window_failure_probability(c, 15, 15), 0.0);
  EXPECT_NEAR(window_failure_probability(c, 15, 25), 0.25, 1e-15);

  // an identity-like map on already calibrated inputs changes nothing
  IsotonicMap identity;
  identity.breakpoints = {0.25};
  identity.values = {0.25};
  EXPECT_NEAR(window_failure_probability(c, 15, 25, &identity), 0.25, 1e-15);
}

TEST(WindowFailureProbability, MonotoneInHorizon) {
  std::mt19937_64 gen(433);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_curve(gen);
    const double i = unif(gen) * c.times.back();
    double prev = -1.0;
    for (int k = 0; k <= 20; ++k) {
      const double j = i + k * c.times.back() / 10.0;
      const double p = window_failure_probability(c, i, j);
      EXPECT_GE(p, prev - 1e-15);
      prev = p;
    }
  }
}

TEST(ExpectedFailures, SumsAndVariance) {
  {
    const auto [e, v] = expected_failures(std::vector<double>{0.0, 0.0});
    EXPECT_DOUBLE_EQ(e, 0.0);
    EXPECT_DOUBLE_EQ(v, 0.0);
  }
  {
    const auto [e, v] = expected_failures(std::vector<double>{0.5, 0.5});
    EXPECT_DOUBLE_EQ(e, 1.0);
    EXPECT_DOUBLE_EQ(v, 0.5);
  }
  {
    const auto [e, v] = expected_failures(std::vector<double>{1.0});
    EXPECT_DOUBLE_EQ(e, 1.0);
    EXPECT_DOUBLE_EQ(v, 0.0);
  }
  EXPECT_THROW(expected_failures(std::vector<double>{1.2}), DomainError);
  EXPECT_THROW(expected_failures(std::vector<double>{-0.1}), DomainError);
}

TEST(ExpectedFailures, LinearUnderConcatenation) {
  std::mt19937_64 gen(439);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> a, b, both;
  for (int i = 0; i < 10; ++i) a.push_back(unif(gen));
  for (int i = 0; i < 7; ++i) b.push_back(unif(gen));
  both = a;
  both.insert(both.end(), b.begin(), b.end());
  EXPECT_DOUBLE_EQ(expected_failures(both).first,
                   expected_failures(a).first + expected_failures(b).first);
}

namespace {

// fleet of subjects alive at t0 with controllable usage rates
Dataset at_risk_fixture(int n, double rate_hours_per_day) {
  Dataset ds;
  for (int i = 0; i < n; ++i) {
    SurvivalRecord r;
    r.id = "s" + std::to_string(i);
    r.install_date = parse_date("2020-01-01");
    r.production_date = r.install_date;
    r.last_log_date = parse_date("2021-01-01");  // equals t0 below
    r.observed_time = rate_hours_per_day * 366;
    r.event = 0;
    ds.records.push_back(r);
  }
  return ds;
}

const PredictionWindow kWindow{fleetlife::parse_date("2021-01-01"),
                               fleetlife::parse_date("2022-01-01")};

}  // namespace

TEST(ForecastWindow, SharedCurveGivesEqualProbabilities) {
  // population-level model: equal (i, j) implies equal p
  KaplanMeierModel km;
  km.curve = step_curve({1000, 3000, 6000}, {0.9, 0.7, 0.4});
  FittedModel model;
  model.model = km;

  const Dataset at_risk = at_risk_fixture(5, 8.0);
  const auto fc = forecast_window(model, at_risk, kWindow);
  ASSERT_EQ(fc.per_subject.size(), 5u);
  const double first = fc.per_subject.begin()->second;
  for (const auto& [id, p] : fc.per_subject) EXPECT_DOUBLE_EQ(p, first);
  EXPECT_NEAR(fc.expected_failures, 5.0 * first, 1e-12);
}

TEST(ForecastWindow, HandComputedTwoSubjects) {
  KaplanMeierModel km;
  km.curve = step_curve({1000, 3000, 6000}, {0.9, 0.7, 0.4});
  FittedModel model;
  model.model = km;

  Dataset at_risk = at_risk_fixture(2, 8.0);
  // subject 1 runs at 4 h/day: i = 1464, j = 1464 + 4*365
  at_risk.records[1].observed_time = 4.0 * 366;

  const auto fc = forecast_window(model, at_risk, kWindow);
  const auto& curve = km.curve;
  const double i0 = 8.0 * 366, j0 = i0 + 8.0 * 365;
  const double i1 = 4.0 * 366, j1 = i1 + 4.0 * 365;
  const double p0 = 1.0 - curve.value_at(j0) / curve.value_at(i0);
  const double p1 = 1.0 - curve.value_at(j1) / curve.value_at(i1);
  EXPECT_DOUBLE_EQ(fc.per_subject.at("s0"), p0);
  EXPECT_DOUBLE_EQ(fc.per_subject.at("s1"), p1);
  EXPECT_DOUBLE_EQ(fc.expected_failures, p0 + p1);
  EXPECT_DOUBLE_EQ(fc.variance, p0 * (1 - p0) + p1 * (1 - p1));
  EXPECT_FALSE(fc.calibrated);
}

TEST(ForecastWindow, OrderInvariant) {
  KaplanMeierModel km;
  km.curve = step_curve({1000, 3000, 6000}, {0.9, 0.7, 0.4});
  FittedModel model;
  model.model = km;

  Dataset at_risk = at_risk_fixture(6, 8.0);
  for (int i = 0; i < 6; ++i)
    at_risk.records[static_cast<std::size_t>(i)].observed_time =
        (3.0 + i) * 366;
  const auto a = forecast_window(model, at_risk, kWindow);
  std::reverse(at_risk.records.begin(), at_risk.records.end());
  const auto b = forecast_window(model, at_risk, kWindow);
  EXPECT_DOUBLE_EQ(a.expected_failures, b.expected_failures);
  EXPECT_EQ(a.per_subject, b.per_subject);
}

TEST(ForecastWindow, ImpossibleSurvivorsAreExcludedAndCounted) {
  KaplanMeierModel km;
  km.curve = step_curve({1000}, {0.0});  // S drops to zero at 1000 h
  FittedModel model;
  model.model = km;

  const Dataset at_risk = at_risk_fixture(3, 8.0);  // exposures ~2928 h
  const auto fc = forecast_window(model, at_risk, kWindow);
  EXPECT_EQ(fc.excluded_count, 3);
  EXPECT_EQ(fc.per_subject.size(), 0u);
  EXPECT_DOUBLE_EQ(fc.expected_failures, 0.0);
  EXPECT_EQ(fc.excluded_ids.size(), 3u);
}

TEST(ForecastWindow, ZeroExposureFallsBackToFleetRate) {
  KaplanMeierModel km;
  km.curve = step_curve({1000, 3000, 6000}, {0.9, 0.7, 0.4});
  FittedModel model;
  model.model = km;

  Dataset at_risk = at_risk_fixture(2, 8.0);
  // freshly installed at t0: no usage history yet
  at_risk.records[1].observed_time = 0.0;
  at_risk.records[1].install_date = kWindow.t0;
  at_risk.records[1].last_log_date = kWindow.t0;

  const auto fc = forecast_window(model, at_risk, kWindow);
  // fleet mean rate is subject 0's 8 h/day, so j = 0 + 8*365 = 2920
  const double expected = 1.0 - km.curve.value_at(8.0 * 365);
  EXPECT_NEAR(fc.per_subject.at("s1"), expected, 1e-12);
}
