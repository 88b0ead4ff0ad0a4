#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "test_support.hpp"
#include "upl/errors.hpp"
#include "upl/propensity.hpp"

namespace upl {
namespace {

TEST(ClickPropensity, PinnedValues) {
  const std::vector<std::size_t> counts{100, 25, 0, 64};
  const auto theta = estimate_click_propensity(counts, 0.5, 1e-2);
  EXPECT_DOUBLE_EQ(theta[0], 1.0);
  EXPECT_DOUBLE_EQ(theta[1], 0.5);
  EXPECT_DOUBLE_EQ(theta[2], 0.01);
  EXPECT_DOUBLE_EQ(theta[3], 0.8);
}

TEST(ClickPropensity, AllZeroCountsCannotBeEstimated) {
  const std::vector<std::size_t> counts{0, 0, 0};
  EXPECT_THROW(estimate_click_propensity(counts), EstimationError);
}

TEST(ClickPropensity, ScaleInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> count(0, 500);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> a(30), b(30);
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] = count(rng);
      b[k] = a[k] * 7;
    }
    const auto ta = estimate_click_propensity(a);
    const auto tb = estimate_click_propensity(b);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(ta[k], tb[k], 1e-15);
  }
}

TEST(NonclickPropensity, PinnedValues) {
  const std::vector<std::size_t> counts{0, 75, 100};
  const auto theta = estimate_nonclick_propensity(counts, 0.5, 1e-2);
  EXPECT_DOUBLE_EQ(theta[0], 1.0);
  EXPECT_DOUBLE_EQ(theta[1], 0.5);
  EXPECT_DOUBLE_EQ(theta[2], 0.01);
}

TEST(PropensityTable, ValuesInUnitInterval) {
  const std::vector<std::size_t> counts{5, 0, 12, 12, 1};
  const auto t = estimate_propensities(counts);
  EXPECT_EQ(t.max_count, 12u);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    EXPECT_GT(t.theta_click[i], 0.0);
    EXPECT_LE(t.theta_click[i], 1.0);
    EXPECT_GT(t.theta_nonclick[i], 0.0);
    EXPECT_LE(t.theta_nonclick[i], 1.0);
  }
  EXPECT_THROW(estimate_propensities(counts, 0.0), DomainError);
  EXPECT_THROW(estimate_propensities(counts, 0.5, 0.0), DomainError);
}

TEST(PosteriorExposure, PinnedValues) {
  EXPECT_DOUBLE_EQ(posterior_exposure(1.0, 0.3), 1.0);
  EXPECT_DOUBLE_EQ(posterior_exposure(0.4, 0.0), 0.4);
  EXPECT_NEAR(posterior_exposure(0.5, 0.5), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(posterior_exposure(1.0, 1.0), SingularityError);
  EXPECT_THROW(posterior_exposure(1.2, 0.5), DomainError);
}

// P(o = 1 | c = 0) by summing the four (o, r) outcomes.
double enumerated_posterior(double theta, double gamma) {
  double exposed_and_unclicked = 0.0;
  double unclicked = 0.0;
  for (int o = 0; o <= 1; ++o) {
    for (int r = 0; r <= 1; ++r) {
      const double p = (o ? theta : 1.0 - theta) * (r ? gamma : 1.0 - gamma);
      if (o * r == 0) {
        unclicked += p;
        if (o == 1) exposed_and_unclicked += p;
      }
    }
  }
  return exposed_and_unclicked / unclicked;
}

TEST(PosteriorExposure, MatchesOutcomeEnumeration) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(1e-6, 1.0 - 1e-6);
  for (int k = 0; k < 10000; ++k) {
    const double theta = unit(rng);
    const double gamma = unit(rng);
    EXPECT_NEAR(posterior_exposure(theta, gamma), enumerated_posterior(theta, gamma), 1e-12);
  }
}

TEST(PropensityIo, RoundTrips) {
  testing::TempDir dir("prop");
  const std::vector<double> values{1.0, 0.1234567890123456789, 0.01};
  save_propensities(values, dir / "p.tsv");
  EXPECT_EQ(load_propensities(dir / "p.tsv"), values);
}

}  // namespace
}  // namespace upl
