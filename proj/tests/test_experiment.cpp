#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "test_support.hpp"
#include "upl/errors.hpp"
#include "upl/experiment.hpp"
#include "upl/experiment_config.hpp"
#include "upl/report.hpp"

namespace upl {
namespace {

using testing::read_file;
using testing::TempDir;
using testing::write_file;

TEST(Config, ParsesKeyValueText) {
  ExperimentConfig c;
  std::istringstream in("# comment\nmethods = bpr, upl\nruns=3\ngrid_lambda=1e-7,1e-3\ncohorts=false\n");
  parse_config(c, in);
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::kBpr, Method::kUpl}));
  EXPECT_EQ(c.runs, 3u);
  EXPECT_EQ(c.grid_lambda, (std::vector<double>{1e-7, 1e-3}));
  EXPECT_FALSE(c.cohorts);
}

TEST(Config, UnknownKeyIsAnErrorWithLocation) {
  ExperimentConfig c;
  std::istringstream in("runs=2\nlearning_rat=0.1\n");
  try {
    parse_config(c, in, "exp.cfg");
    FAIL() << "expected ArgumentError";
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("exp.cfg:2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("learning_rat"), std::string::npos);
  }
}

TEST(Config, BadValuesAreRejected) {
  ExperimentConfig c;
  EXPECT_THROW(apply_config_value(c, "runs", "two"), ArgumentError);
  EXPECT_THROW(apply_config_value(c, "methods", "bpr,svd"), Error);
  EXPECT_THROW(apply_config_value(c, "format", "csv"), Error);
  c.runs = 0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c.runs = 1;
  c.grid_clip = {0.5};
  EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Config, EveryDocumentedKeyIsAccepted) {
  ExperimentConfig c;
  std::istringstream in(c.canonical_text());
  ExperimentConfig back;
  parse_config(back, in);
  EXPECT_EQ(back.canonical_text(), c.canonical_text());
  std::size_t lines = 0;
  for (char ch : c.canonical_text()) lines += ch == '\n';
  // out and threads are documented but excluded from the canonical text
  EXPECT_EQ(config_keys().size(), lines + 2);
}

TEST(Config, HashIgnoresOutputLocationAndThreads) {
  ExperimentConfig a, b;
  b.out = "elsewhere";
  b.threads = 8;
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 1;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(Grid, ClipValuesOnlyForClippedUbpr) {
  ExperimentConfig c;
  EXPECT_EQ(hyperparameter_grid(c, Method::kBpr).size(), 9u);
  EXPECT_EQ(hyperparameter_grid(c, Method::kUbprClipped).size(), 36u);
  for (const auto& hp : hyperparameter_grid(c, Method::kUpl)) EXPECT_FALSE(hp.clip.has_value());
  c.grid_search = false;
  EXPECT_EQ(hyperparameter_grid(c, Method::kUbprClipped).size(), 1u);
}

ExperimentConfig small_config(const TempDir& dir, const std::string& out) {
  write_file(dir / "train.ascii", testing::synthetic_dense_ratings(30, 24, 1, 0.5));
  write_file(dir / "test.ascii", testing::synthetic_dense_ratings(30, 24, 2, 0.3));
  ExperimentConfig c;
  c.dataset = dir.path();
  c.out = dir / out;
  c.methods = {Method::kBpr};
  c.runs = 2;
  c.grid_dim = {4};
  c.grid_lambda = {1e-5};
  c.grid_clip = {0.0};
  c.max_epochs = 4;
  c.learning_rate = 0.01;
  c.batch_size = 64;
  return c;
}

std::size_t count_rows(const std::vector<MetricRow>& rows, const std::string& method,
                       const std::string& cohort, const std::string& metric, std::size_t k) {
  return std::count_if(rows.begin(), rows.end(), [&](const MetricRow& r) {
    return r.method == method && r.cohort == cohort && r.metric == metric && r.k == k;
  });
}

TEST(Experiment, OneReportPerRunCohortAndCutoff) {
  TempDir dir("exp_card");
  const ExperimentConfig c = small_config(dir, "out");
  const auto result = run_experiment(c);
  ASSERT_EQ(result.outcomes.size(), 1u);
  ASSERT_FALSE(result.outcomes[0].error.has_value());
  const auto rows = read_runs_tsv(c.out / "runs.tsv");
  for (const std::string cohort : {"all", "cold_start_users", "rare_items"}) {
    const bool present = count_rows(rows, "bpr", cohort, "DCG", 3) > 0;
    if (cohort == "all") ASSERT_TRUE(present);
    if (!present) continue;
    for (std::size_t k : {3u, 5u, 8u}) {
      for (const std::string metric : {"DCG", "Recall", "MAP"}) {
        EXPECT_EQ(count_rows(rows, "bpr", cohort, metric, k), 2u) << cohort << metric << k;
      }
    }
  }
  for (const char* name : {"config.txt", "selection.tsv", "runs.tsv", "runs_meta.tsv", "errors.tsv",
                           "summary.tsv", "summary.md", "significance.tsv"}) {
    const std::string text = read_file(c.out / name);
    EXPECT_NE(text.substr(0, text.find('\n')).find("config_hash=" + c.hash()), std::string::npos)
        << name;
  }
}

TEST(Experiment, RerunIsByteIdenticalAcrossThreadCounts) {
  TempDir dir("exp_det");
  ExperimentConfig c = small_config(dir, "a");
  c.methods = {Method::kWmf, Method::kRelmf, Method::kMfdu, Method::kBpr, Method::kUbprClipped,
               Method::kUbprNclip, Method::kUpl};
  c.grid_lambda = {1e-5, 1e-3};
  c.grid_clip = {0.0, -1.0};
  c.max_epochs = 3;
  run_experiment(c);
  ExperimentConfig again = c;
  again.out = dir / "b";
  again.threads = 3;
  run_experiment(again);
  for (const char* name : {"runs.tsv", "selection.tsv", "summary.tsv", "summary.md", "significance.tsv"}) {
    EXPECT_EQ(read_file(c.out / name), read_file(again.out / name)) << name;
  }
  const std::string md = read_file(c.out / "summary.md");
  for (const char* label : {"WMF", "Rel-MF", "MF-DU", "BPR", "UBPR", "UBPR_NClip", "UPL"}) {
    EXPECT_NE(md.find("| " + std::string(label) + " |"), std::string::npos) << label;
  }
}

TEST(Experiment, AggregatedMeansEqualRunAverages) {
  TempDir dir("exp_mean");
  ExperimentConfig c = small_config(dir, "out");
  c.methods = {Method::kBpr, Method::kUbprNclip};
  c.runs = 3;
  run_experiment(c);
  const auto rows = read_runs_tsv(c.out / "runs.tsv");
  std::map<std::tuple<std::string, std::string, std::string, std::size_t>, std::pair<double, int>> sums;
  for (const auto& r : rows) {
    auto& s = sums[{r.method, r.cohort, r.metric, r.k}];
    s.first += r.value;
    s.second += 1;
  }
  std::istringstream summary(read_file(c.out / "summary.tsv"));
  std::string line;
  std::getline(summary, line);  // stamp
  std::getline(summary, line);  // header
  std::size_t checked = 0;
  while (std::getline(summary, line)) {
    std::istringstream f(line);
    std::string method, cohort, metric;
    std::size_t k = 0, n = 0;
    double mean = 0.0, sd = 0.0;
    f >> method >> cohort >> metric >> k >> mean >> sd >> n;
    const auto& s = sums.at({method, cohort, metric, k});
    EXPECT_NEAR(mean, s.first / s.second, 1e-9);
    EXPECT_EQ(n, static_cast<std::size_t>(s.second));
    ++checked;
  }
  EXPECT_EQ(checked, sums.size());
}

TEST(Experiment, FailingMethodIsRecordedAndOthersContinue) {
  TempDir dir("exp_fail");
  ExperimentConfig c = small_config(dir, "out");
  c.methods = {Method::kMfdu, Method::kBpr};
  // 1 / floor overflows, so the dual-propensity loss becomes infinite
  c.propensity_floor = 1e-320;
  const auto result = run_experiment(c);
  ASSERT_EQ(result.outcomes.size(), 2u);
  EXPECT_TRUE(result.outcomes[0].error.has_value());
  EXPECT_FALSE(result.outcomes[1].error.has_value());
  EXPECT_FALSE(result.outcomes[1].reports.empty());
  EXPECT_NE(read_file(c.out / "errors.tsv").find("mfdu\t"), std::string::npos);
  const auto rows = read_runs_tsv(c.out / "runs.tsv");
  EXPECT_EQ(count_rows(rows, "mfdu", "all", "DCG", 5), 0u);
  EXPECT_EQ(count_rows(rows, "bpr", "all", "DCG", 5), 2u);
}

TEST(Experiment, PreparedDataRoundTrips) {
  TempDir dir("prep");
  const ExperimentConfig c = small_config(dir, "prepared");
  const PreparedData data = prepare_data(c);
  EXPECT_EQ(data.test.epsilon, 0.0);
  EXPECT_EQ(data.train.epsilon, 0.1);
  save_prepared(data, c.out);
  const PreparedData back = load_prepared(c.out, c.propensity_power, c.propensity_floor);
  EXPECT_EQ(back.train.exposed, data.train.exposed);
  EXPECT_EQ(back.validation.exposed, data.validation.exposed);
  EXPECT_EQ(back.test.exposed, data.test.exposed);
  EXPECT_EQ(back.propensities.theta_click, data.propensities.theta_click);
}

TEST(Report, SignificanceComparesUplWithBestBaseline) {
  std::vector<MetricRow> rows;
  const double upl[] = {0.30, 0.31, 0.32, 0.33};
  const double bpr[] = {0.20, 0.21, 0.22, 0.20};
  const double wmf[] = {0.25, 0.24, 0.26, 0.25};
  for (int r = 0; r < 4; ++r) {
    rows.push_back({"upl", r, "all", "DCG", 5, upl[r]});
    rows.push_back({"bpr", r, "all", "DCG", 5, bpr[r]});
    rows.push_back({"wmf", r, "all", "DCG", 5, wmf[r]});
  }
  const auto sig = significance(rows);
  ASSERT_EQ(sig.size(), 1u);
  EXPECT_EQ(sig[0].method_b, "wmf");
  EXPECT_LT(sig[0].p_value, 0.05);
  const auto agg = aggregate(rows);
  ASSERT_EQ(agg.size(), 3u);
  EXPECT_EQ(agg[0].method, "upl");
  EXPECT_NEAR(agg[0].mean, 0.315, 1e-15);
}

}  // namespace
}  // namespace upl
