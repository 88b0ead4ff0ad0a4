#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "upl/dataset.hpp"
#include "upl/factor_model.hpp"

namespace upl {

struct RankMetrics {
  double dcg = 0.0;
  double recall = 0.0;
  double ap = 0.0;
};

// Ranks candidates by score descending, ties broken by ascending position, and
// computes over the top K:
//   DCG@K    = sum_{r <= K} rel_r / log2(r + 1)
//   Recall@K = sum_{r <= K} rel_r / sum rel
//   AP@K     = (1 / sum rel) sum_{r <= K} rel_r * (sum_{s <= r} rel_s) / r
// Relevance is normally binary; graded values in [0, 1] are accepted for
// diagnostics. Returns nullopt when no candidate is relevant.
// Throws DomainError on an empty list or K == 0.
std::optional<RankMetrics> rank_metrics(std::span<const double> scores,
                                        std::span<const double> relevance, std::size_t k);

enum class Cohort { kAll, kColdStartUsers, kRareItems };

std::string_view to_string(Cohort cohort);
Cohort parse_cohort(std::string_view name);

struct CohortSpec {
  std::size_t rare_item_click_threshold = 100;      // rare: fewer training clicks
  std::size_t cold_start_user_click_threshold = 6;  // cold start: fewer training clicks

  void validate() const;
};

struct MetricValues {
  std::size_t k = 0;
  double dcg = 0.0;
  double recall = 0.0;
  double map = 0.0;
};

struct MetricReport {
  std::string method;
  int run = 0;
  Cohort cohort = Cohort::kAll;
  std::size_t num_users = 0;        // users that entered the average
  std::vector<MetricValues> values;  // one per K; empty when num_users == 0

  const MetricValues* at(std::size_t k) const;
};

struct EvaluationOptions {
  std::vector<std::size_t> ks{3, 5, 8};
  std::vector<Cohort> cohorts{Cohort::kAll};
  CohortSpec cohort_spec;
  // Score against gamma instead of the binary relevance draw.
  bool graded_relevance = false;
};

// Training-split click counts used to define cohorts.
struct CohortCounts {
  std::vector<std::size_t> user_clicks;
  std::vector<std::size_t> item_clicks;

  static CohortCounts from(const ImplicitDataset& train);
};

// Each user is ranked over their own exposed cells of `split`. The cold-start
// cohort keeps only users with few training clicks; the rare-item cohort keeps
// every candidate but credits relevance only to rare items.
std::vector<MetricReport> evaluate(const FactorModel& model, const ImplicitDataset& split,
                                   const CohortCounts& counts, const EvaluationOptions& options);

// Mean DCG@K over all users with at least one relevant cell.
double mean_dcg(const FactorModel& model, const ImplicitDataset& split, std::size_t k);

// "method run cohort metric K value" rows, value printed with %.10f.
void write_reports_tsv(std::ostream& out, std::span<const MetricReport> reports,
                       bool header = true);

}  // namespace upl
