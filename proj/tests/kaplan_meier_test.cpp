#include <gtest/gtest.h>

#include <random>

#include "fleetlife/kaplan_meier.hpp"
#include "test_support.hpp"

using namespace fleetlife;
using testsupport::make_dataset;

TEST(KaplanMeier, AllCensoredIsFlatOne) {
  const auto model = fit_kaplan_meier(make_dataset({{5, 0}, {10, 0}, {20, 0}}));
  EXPECT_TRUE(model.curve.times.empty());
  for (double t : {0.0, 5.0, 100.0}) EXPECT_DOUBLE_EQ(model.curve.value_at(t), 1.0);
}

TEST(KaplanMeier, HandComputedRiskSets) {
  // times/events {(1,1),(2,0),(3,1)}: r = (3, 1), d = (1, 1)
  const auto model = fit_kaplan_meier(make_dataset({{1, 1}, {2, 0}, {3, 1}}));
  ASSERT_EQ(model.curve.times, (std::vector<double>{1, 3}));
  EXPECT_NEAR(model.curve.probs[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(model.curve.probs[1], 0.0, 1e-15);
  EXPECT_EQ(model.risk_counts, (std::vector<int>{3, 1}));
  EXPECT_EQ(model.event_counts, (std::vector<int>{1, 1}));

  // right-continuous evaluation; the stored curve steps at event times
  EXPECT_DOUBLE_EQ(model.curve.value_at(0.5), 1.0);
  EXPECT_NEAR(model.curve.value_at(1.0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(model.curve.value_at(2.5), 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(model.curve.value_at(3.5), 0.0);
  // the left limit recovers Pr(T >= t) at the steps
  EXPECT_DOUBLE_EQ(model.curve.value_before(1.0), 1.0);
  EXPECT_NEAR(model.curve.value_before(3.0), 2.0 / 3.0, 1e-15);
}

TEST(KaplanMeier, TiedEventsShareOneFactor) {
  // {(5,1),(5,1),(10,0),(10,0)}: single step at 5 with d=2, r=4
  const auto model =
      fit_kaplan_meier(make_dataset({{5, 1}, {5, 1}, {10, 0}, {10, 0}}));
  ASSERT_EQ(model.curve.times, (std::vector<double>{5}));
  EXPECT_DOUBLE_EQ(model.curve.probs[0], 0.5);
  EXPECT_EQ(model.risk_counts, (std::vector<int>{4}));
  EXPECT_EQ(model.event_counts, (std::vector<int>{2}));
  EXPECT_DOUBLE_EQ(model.curve.value_at(100.0), 0.5);
}

TEST(KaplanMeier, EmptyDatasetRejected) {
  EXPECT_THROW(fit_kaplan_meier(Dataset{}), EmptyInputError);
}

TEST(KaplanMeier, NoCensoringMatchesEmpiricalSurvival) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> unif(1.0, 50.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<double, int>> obs;
    const int n = 5 + static_cast<int>(unif(gen));
    for (int i = 0; i < n; ++i) obs.emplace_back(std::round(unif(gen)), 1);
    const auto model = fit_kaplan_meier(make_dataset(obs));
    for (std::size_t k = 0; k < model.curve.times.size(); ++k) {
      const double t = model.curve.times[k];
      int beyond = 0;
      for (const auto& [y, e] : obs)
        if (y > t) ++beyond;
      // with no censoring, S(t+) is the empirical fraction still alive
      EXPECT_NEAR(model.curve.probs[k], static_cast<double>(beyond) / n, 1e-12);
    }
  }
}

TEST(KaplanMeier, OrderInvariant) {
  std::vector<std::pair<double, int>> obs = {{4, 1}, {2, 0}, {9, 1}, {2, 1},
                                             {7, 0}, {1, 1}, {9, 0}};
  const auto a = fit_kaplan_meier(make_dataset(obs));
  std::reverse(obs.begin(), obs.end());
  const auto b = fit_kaplan_meier(make_dataset(obs));
  EXPECT_EQ(a.curve.times, b.curve.times);
  EXPECT_EQ(a.curve.probs, b.curve.probs);
}

TEST(KaplanMeier, MatchesBruteForceOracle) {
  std::mt19937_64 gen(23);
  std::uniform_int_distribution<int> size(1, 12);
  std::uniform_int_distribution<int> time(1, 8);  // forces ties
  std::uniform_int_distribution<int> ev(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<double, int>> obs;
    const int n = size(gen);
    for (int i = 0; i < n; ++i)
      obs.emplace_back(static_cast<double>(time(gen)), ev(gen));
    const auto model = fit_kaplan_meier(make_dataset(obs));
    const auto oracle = testsupport::kaplan_meier_oracle(obs);
    ASSERT_EQ(model.curve.times, oracle.times);
    ASSERT_EQ(model.curve.probs.size(), oracle.probs.size());
    for (std::size_t k = 0; k < oracle.probs.size(); ++k)
      EXPECT_NEAR(model.curve.probs[k], oracle.probs[k], 1e-12);
  }
}

TEST(KaplanMeier, CurveInvariantsHold) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<double, int>> obs;
    const int n = 2 + static_cast<int>(unif(gen) * 30);
    for (int i = 0; i < n; ++i)
      obs.emplace_back(1.0 + unif(gen) * 20.0, unif(gen) < 0.6 ? 1 : 0);
    const auto model = fit_kaplan_meier(make_dataset(obs));
    EXPECT_NO_THROW(model.curve.validate());
    for (std::size_t j = 1; j < model.risk_counts.size(); ++j)
      EXPECT_LT(model.risk_counts[j], model.risk_counts[j - 1]);
    for (std::size_t j = 0; j < model.event_counts.size(); ++j) {
      EXPECT_GE(model.event_counts[j], 1);
      EXPECT_LE(model.event_counts[j], model.risk_counts[j]);
    }
  }
}
