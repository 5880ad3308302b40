#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "nhdp/randdist.hpp"

using namespace nhdp;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

TEST(Rng, SameSeedAndStreamGiveSameSequence) {
  Rng a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    differs = differs || x != c.uniform();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, SaveAndLoadStateResumesSequence) {
  Rng a(3);
  for (int i = 0; i < 17; ++i) a.uniform();
  Rng b(99);
  b.load_state(a.save_state());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(Dirichlet, SingleComponentIsOne) {
  Rng rng(1);
  const std::vector<double> a{1.0};
  EXPECT_EQ(sample_dirichlet(a, rng), std::vector<double>{1.0});
}

TEST(Dirichlet, SampleMeansMatch) {
  Rng rng(2);
  for (const auto& alpha : {std::vector<double>{2, 2}, std::vector<double>{3, 1}}) {
    std::vector<double> mean(2, 0.0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const auto x = sample_dirichlet(alpha, rng);
      EXPECT_NEAR(x[0] + x[1], 1.0, 1e-12);
      mean[0] += x[0] / n;
      mean[1] += x[1] / n;
    }
    const double s = alpha[0] + alpha[1];
    EXPECT_NEAR(mean[0], alpha[0] / s, 0.01);
    EXPECT_NEAR(mean[1], alpha[1] / s, 0.01);
  }
}

TEST(Dirichlet, TinyConcentrationsStayOnSimplex) {
  Rng rng(3);
  const std::vector<double> a(50, 1e-4);
  for (int i = 0; i < 100; ++i) {
    const auto x = sample_dirichlet(a, rng);
    EXPECT_NEAR(std::accumulate(x.begin(), x.end(), 0.0), 1.0, 1e-10);
  }
}

TEST(CrpPredictive, Examples) {
  const std::vector<std::int64_t> c{2, 1};
  const auto p = crp_predictive(c, 1.0);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.25);
  EXPECT_DOUBLE_EQ(p[2], 0.25);

  EXPECT_EQ(crp_predictive(std::vector<std::int64_t>{}, 0.5), std::vector<double>{1.0});

  const auto lim = crp_predictive(std::vector<std::int64_t>{5}, 1e-300);
  EXPECT_NEAR(lim[0], 1.0, 1e-12);
  EXPECT_NEAR(lim[1], 0.0, 1e-12);
}

TEST(CrpPredictive, SumsToOne) {
  const std::vector<std::int64_t> c{7, 0, 3, 1};
  for (double a : {0.01, 1.0, 30.0}) {
    const auto p = crp_predictive(c, a);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(StickBreaking, ZeroSticks) {
  Rng rng(4);
  const auto s = stick_breaking(1.0, 0, rng);
  EXPECT_TRUE(s.weights.empty());
  EXPECT_EQ(s.remainder, 1.0);
}

TEST(StickBreaking, FirstStickMeanAndPositiveRemainder) {
  Rng rng(5);
  double mean = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto s = stick_breaking(1.0, 1, rng);
    mean += s.weights[0] / n;
    EXPECT_GT(s.remainder, 0.0);
  }
  EXPECT_NEAR(mean, 0.5, 0.01);
  for (int i = 0; i < 1000; ++i) EXPECT_GT(stick_breaking(0.3, 20, rng).remainder, 0.0);
}

TEST(TableCount, Degenerate) {
  Rng rng(6);
  EXPECT_EQ(sample_table_count(0.7, 0, rng), 0u);
  EXPECT_EQ(sample_table_count(0.7, 1, rng), 1u);
  EXPECT_EQ(expected_table_count(3.0, 0), 0.0);
}

TEST(TableCount, ExpectedValues) {
  EXPECT_NEAR(expected_table_count(1.0, 3), 11.0 / 6.0, 1e-14);
  EXPECT_NEAR(expected_table_count(0.5, 2), 4.0 / 3.0, 1e-14);
}

TEST(TableCount, EmpiricalMean) {
  Rng rng(7);
  double mean = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) mean += sample_table_count(1.0, 3, rng) / static_cast<double>(n);
  EXPECT_NEAR(mean, 11.0 / 6.0, 0.01 * 11.0 / 6.0);
}

TEST(Eppf, Examples) {
  EXPECT_NEAR(eppf_log_prob(std::vector<std::uint32_t>{1}, 1.0), 0.0, 1e-14);
  EXPECT_NEAR(eppf_log_prob(std::vector<std::uint32_t>{2}, 1.0), std::log(0.5), 1e-14);
  EXPECT_NEAR(eppf_log_prob(std::vector<std::uint32_t>{1, 1}, 1.0), std::log(0.5), 1e-14);
}

TEST(Eppf, SumsToOneOverPartitionsOfFour) {
  // Partition shapes of 4 with their number of set partitions.
  const std::vector<std::pair<std::vector<std::uint32_t>, int>> shapes = {
      {{4}, 1}, {{3, 1}, 4}, {{2, 2}, 3}, {{2, 1, 1}, 6}, {{1, 1, 1, 1}, 1}};
  for (double a : {0.3, 1.0, 4.0}) {
    double s = 0.0;
    for (const auto& [b, mult] : shapes) s += mult * std::exp(eppf_log_prob(b, a));
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Categorical, NegInfNeverChosen) {
  Rng rng(8);
  const std::vector<double> w{0.0, kNegInf};
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_categorical_log(w, rng), 0u);
}

TEST(Categorical, FrequenciesAndShiftInvariance) {
  const std::vector<double> w{std::log(2.0), 0.0, 0.0};
  std::vector<double> shifted = w;
  for (auto& x : shifted) x += 700.0;
  Rng a(9), b(9);
  std::vector<int> hits(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto k = sample_categorical_log(w, a);
    EXPECT_EQ(k, sample_categorical_log(shifted, b));
    ++hits[k];
  }
  EXPECT_NEAR(hits[0] / static_cast<double>(n), 0.5, 0.01);
  EXPECT_NEAR(hits[1] / static_cast<double>(n), 0.25, 0.01);
  EXPECT_NEAR(hits[2] / static_cast<double>(n), 0.25, 0.01);
}

TEST(LogSumExp, Basics) {
  const std::vector<double> v{std::log(1.0), std::log(3.0)};
  EXPECT_NEAR(log_sum_exp(v), std::log(4.0), 1e-14);
  const auto p = normalize_log(v);
  EXPECT_NEAR(p[0], 0.25, 1e-14);
  const std::vector<double> none{kNegInf, kNegInf};
  EXPECT_EQ(log_sum_exp(none), kNegInf);
}
