#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "upl/errors.hpp"
#include "upl/evaluation.hpp"
#include "upl/stats.hpp"

namespace upl {
namespace {

using testing::make_dataset;

RankMetrics metrics_of(std::vector<double> scores, std::vector<double> rel, std::size_t k) {
  const auto m = rank_metrics(scores, rel, k);
  EXPECT_TRUE(m.has_value());
  return m.value_or(RankMetrics{});
}

TEST(RankMetrics, PerfectSingleItem) {
  const auto m = metrics_of({3.0, 1.0, 0.0}, {1, 0, 0}, 3);
  EXPECT_DOUBLE_EQ(m.dcg, 1.0);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(m.ap, 1.0);
}

TEST(RankMetrics, RelevantItemSecond) {
  const auto m = metrics_of({0.2, 0.9}, {1, 0}, 3);
  EXPECT_NEAR(m.dcg, 0.6309297535714574, 1e-15);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(m.ap, 0.5);
}

TEST(RankMetrics, TwoRelevantAtRanksOneAndThree) {
  const auto m = metrics_of({5, 4, 3, 2, 1}, {1, 0, 1, 0, 0}, 3);
  EXPECT_DOUBLE_EQ(m.dcg, 1.5);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_NEAR(m.ap, 5.0 / 6.0, 1e-15);
}

TEST(RankMetrics, CutoffDropsLateRelevantItem) {
  const auto m = metrics_of({5, 4, 3, 2, 1}, {0, 1, 0, 0, 1}, 3);
  EXPECT_NEAR(m.dcg, 1.0 / std::log2(3.0), 1e-15);
  EXPECT_DOUBLE_EQ(m.recall, 0.5);
  EXPECT_DOUBLE_EQ(m.ap, 0.25);
}

TEST(RankMetrics, TiesKeepInputOrder) {
  const auto m = metrics_of({0.5, 0.5, 0.5}, {0, 0, 1}, 2);
  EXPECT_DOUBLE_EQ(m.dcg, 0.0);
  EXPECT_DOUBLE_EQ(m.recall, 0.0);
  EXPECT_DOUBLE_EQ(m.ap, 0.0);
}

TEST(RankMetrics, CutoffBeyondListLength) {
  const auto m = metrics_of({2, 1}, {1, 1}, 8);
  EXPECT_NEAR(m.dcg, 1.0 + 1.0 / std::log2(3.0), 1e-15);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(m.ap, 1.0);
}

TEST(RankMetrics, NoRelevantItemMeansExcluded) {
  const std::vector<double> s{1, 2}, r{0, 0};
  EXPECT_FALSE(rank_metrics(s, r, 3).has_value());
}

TEST(RankMetrics, RejectsEmptyListAndZeroCutoff) {
  const std::vector<double> none, s{1}, r{1};
  EXPECT_THROW(rank_metrics(none, none, 3), DomainError);
  EXPECT_THROW(rank_metrics(s, r, 0), DomainError);
}

TEST(RankMetrics, InvariantUnderCandidatePermutation) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(12), r(12);
    for (auto& x : s) x = normal(rng);
    for (auto& x : r) x = coin(rng);
    r[trial % 12] = 1.0;
    std::vector<std::size_t> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> ps(12), pr(12);
    for (std::size_t k = 0; k < 12; ++k) ps[k] = s[perm[k]], pr[k] = r[perm[k]];
    for (std::size_t k : {1u, 3u, 5u, 8u, 20u}) {
      const auto a = metrics_of(s, r, k), b = metrics_of(ps, pr, k);
      EXPECT_NEAR(a.dcg, b.dcg, 1e-12);
      EXPECT_NEAR(a.recall, b.recall, 1e-12);
      EXPECT_NEAR(a.ap, b.ap, 1e-12);
    }
  }
}

TEST(RankMetrics, PerfectRankingRecallIsCoveredFraction) {
  for (std::size_t n = 1; n <= 6; ++n) {
    std::vector<double> s(10), r(10, 0.0);
    for (std::size_t k = 0; k < 10; ++k) s[k] = 10.0 - static_cast<double>(k);
    for (std::size_t k = 0; k < n; ++k) r[k] = 1.0;
    for (std::size_t k : {1u, 3u, 5u, 8u}) {
      EXPECT_DOUBLE_EQ(metrics_of(s, r, k).recall,
                       static_cast<double>(std::min(k, n)) / static_cast<double>(n));
    }
  }
}

FactorModel model_with_scores(std::size_t users, std::size_t items,
                              const std::vector<std::vector<double>>& scores) {
  // dim = items, user row = its score vector, item rows = unit vectors
  FactorModel m(users, items, items);
  for (UserIndex u = 0; u < users; ++u) {
    for (ItemIndex i = 0; i < items; ++i) {
      m.user(u)[i] = scores[u][i];
      m.item(i)[i] = 1.0;
    }
  }
  return m;
}

TEST(Evaluate, TwoUserAveragesMatchHandValues) {
  // user 0: items 0,1,2 exposed, relevant {1}; scores rank 1 second -> dcg@3 1/log2(3)
  // user 1: items 0,3 exposed, relevant {0,3}; perfect -> dcg@3 1 + 1/log2(3)
  const auto test = make_dataset(2, 4, {{0, 0, false}, {0, 1, true}, {0, 2, false}, {1, 0, true}, {1, 3, true}});
  const FactorModel m = model_with_scores(2, 4, {{3, 2, 1, 0}, {2, 0, 0, 1}});
  EvaluationOptions opt;
  opt.ks = {3};
  const auto reports = evaluate(m, test, CohortCounts::from(test), opt);
  ASSERT_EQ(reports.size(), 1u);
  ASSERT_EQ(reports[0].num_users, 2u);
  const double l3 = 1.0 / std::log2(3.0);
  EXPECT_NEAR(reports[0].values[0].dcg, (l3 + 1.0 + l3) / 2.0, 1e-15);
  EXPECT_NEAR(reports[0].values[0].recall, 1.0, 1e-15);
  EXPECT_NEAR(reports[0].values[0].map, (0.5 + 1.0) / 2.0, 1e-15);
}

TEST(Evaluate, UsersWithoutRelevantItemsAreExcluded) {
  const auto test = make_dataset(2, 2, {{0, 0, true}, {1, 1, false}});
  const FactorModel m = model_with_scores(2, 2, {{1, 0}, {1, 0}});
  EvaluationOptions opt;
  opt.ks = {3};
  const auto reports = evaluate(m, test, CohortCounts::from(test), opt);
  EXPECT_EQ(reports[0].num_users, 1u);
  EXPECT_DOUBLE_EQ(reports[0].values[0].dcg, 1.0);
}

TEST(Evaluate, ColdStartCohortEmptyWhenEveryUserIsActive) {
  std::vector<testing::Cell> cells;
  for (UserIndex u = 0; u < 3; ++u) {
    for (ItemIndex i = 0; i < 8; ++i) cells.push_back({u, i, i < 6});
  }
  const auto train = make_dataset(3, 8, cells);
  const auto test = make_dataset(3, 8, {{0, 7, true}, {1, 6, true}, {2, 6, true}, {2, 7, false}});
  EvaluationOptions opt;
  opt.cohorts = {Cohort::kAll, Cohort::kColdStartUsers};
  const auto reports = evaluate(init_model(3, 8, 2, 1), test, CohortCounts::from(train), opt);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(reports[0].num_users, 3u);
  EXPECT_EQ(reports[1].num_users, 0u);
  EXPECT_TRUE(reports[1].values.empty());
}

TEST(Evaluate, RareItemCohortCreditsOnlyRareItems) {
  CohortCounts counts;
  counts.user_clicks = {0};
  counts.item_clicks = {500, 3};
  const auto test = make_dataset(1, 2, {{0, 0, true}, {0, 1, true}});
  const FactorModel m = model_with_scores(1, 2, {{2, 1}});
  EvaluationOptions opt;
  opt.ks = {3};
  opt.cohorts = {Cohort::kRareItems};
  const auto reports = evaluate(m, test, counts, opt);
  // only item 1 counts as relevant, and it sits at rank 2
  EXPECT_NEAR(reports[0].values[0].dcg, 1.0 / std::log2(3.0), 1e-15);
  EXPECT_DOUBLE_EQ(reports[0].values[0].map, 0.5);
}

TEST(Evaluate, OracleScoresBeatRandomScores) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.3);
  std::vector<testing::Cell> cells;
  std::vector<std::vector<double>> truth(30, std::vector<double>(20, 0.0));
  for (UserIndex u = 0; u < 30; ++u) {
    for (ItemIndex i = 0; i < 20; ++i) {
      const bool rel = coin(rng);
      cells.push_back({u, i, rel});
      truth[u][i] = rel ? 1.0 : 0.0;
    }
  }
  const auto test = make_dataset(30, 20, cells);
  const double oracle = mean_dcg(model_with_scores(30, 20, truth), test, 5);
  const double random = mean_dcg(init_model(30, 20, 8, 4, 1.0), test, 5);
  EXPECT_GT(oracle, random);
}

TEST(Evaluate, TsvRowsPerMetricAndCutoff) {
  MetricReport r;
  r.method = "bpr";
  r.run = 2;
  r.num_users = 1;
  r.values = {{3, 0.5, 0.25, 0.125}};
  std::ostringstream out;
  write_reports_tsv(out, std::span(&r, 1));
  EXPECT_EQ(out.str(),
            "method\trun\tcohort\tmetric\tK\tvalue\n"
            "bpr\t2\tall\tDCG\t3\t0.5000000000\n"
            "bpr\t2\tall\tRecall\t3\t0.2500000000\n"
            "bpr\t2\tall\tMAP\t3\t0.1250000000\n");
}

TEST(WelchTest, IdenticalSamplesGiveHalf) {
  const std::vector<double> a{0.3, 0.4, 0.5};
  const auto t = one_tailed_t_test(a, a);
  EXPECT_DOUBLE_EQ(t.p_value, 0.5);
  const std::vector<double> c{1, 1, 1};
  const auto d = one_tailed_t_test(c, c);
  EXPECT_TRUE(d.degenerate);
  EXPECT_DOUBLE_EQ(d.p_value, 0.5);
}

TEST(WelchTest, SeparatedSamples) {
  const std::vector<double> a{1.0, 1.0 + 1e-9, 1.0 - 1e-9, 1.0};
  const std::vector<double> b{0.0, 1e-9, -1e-9, 0.0};
  EXPECT_LT(one_tailed_t_test(a, b).p_value, 1e-6);
  EXPECT_GT(one_tailed_t_test(b, a).p_value, 1.0 - 1e-6);
}

TEST(WelchTest, MatchesReferenceImplementation) {
  // reference p-values from scipy.stats.ttest_ind(equal_var=False, alternative="greater")
  const std::vector<double> a{0.5, 0.6, 0.7}, b{0.4, 0.5, 0.6};
  EXPECT_NEAR(one_tailed_t_test(a, b).p_value, 0.1439320673633454, 1e-6);
  const std::vector<double> c{0.31, 0.29, 0.35, 0.30, 0.33}, d{0.28, 0.30, 0.27, 0.26};
  EXPECT_NEAR(one_tailed_t_test(c, d).p_value, 0.013342230915975863, 1e-6);
}

TEST(Moments, StreamingAgreesWithTwoPass) {
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> expo(2.0);
  std::vector<double> xs(5000);
  MomentAccumulator acc;
  for (auto& x : xs) {
    x = expo(rng);
    acc.add(x);
  }
  EXPECT_NEAR(acc.mean(), mean(xs), 1e-12);
  EXPECT_NEAR(acc.variance(), sample_variance(xs), 1e-12);
  EXPECT_NEAR(acc.standard_error(), std::sqrt(sample_variance(xs) / 5000.0), 1e-12);
}

TEST(Moments, CompensatedSumKeepsSmallTerms) {
  CompensatedSum s;
  s.add(1e16);
  for (int k = 0; k < 1000; ++k) s.add(1.0);
  s.add(-1e16);
  EXPECT_DOUBLE_EQ(s.value(), 1000.0);
}

}  // namespace
}  // namespace upl
