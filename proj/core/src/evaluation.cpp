#include "upl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "upl/errors.hpp"

namespace upl {

std::optional<RankMetrics> rank_metrics(std::span<const double> scores,
                                        std::span<const double> relevance, std::size_t k) {
  if (scores.empty()) throw DomainError("rank_metrics: empty candidate list");
  if (scores.size() != relevance.size()) throw ArgumentError("scores/relevance size mismatch");
  if (k == 0) throw DomainError("rank_metrics: K must be >= 1");

  const double total = std::accumulate(relevance.begin(), relevance.end(), 0.0);
  if (!(total > 0.0)) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t depth = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(depth), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });

  RankMetrics m;
  double hits = 0.0;
  for (std::size_t r = 1; r <= depth; ++r) {
    const double rel = relevance[order[r - 1]];
    hits += rel;
    m.dcg += rel / std::log2(static_cast<double>(r) + 1.0);
    m.ap += rel * hits / static_cast<double>(r);
  }
  m.recall = hits / total;
  m.ap /= total;
  return m;
}

std::string_view to_string(Cohort cohort) {
  switch (cohort) {
    case Cohort::kAll:
      return "all";
    case Cohort::kColdStartUsers:
      return "cold_start_users";
    case Cohort::kRareItems:
      return "rare_items";
  }
  return "all";
}

Cohort parse_cohort(std::string_view name) {
  if (name == "all") return Cohort::kAll;
  if (name == "cold_start_users" || name == "cold_start") return Cohort::kColdStartUsers;
  if (name == "rare_items" || name == "rare") return Cohort::kRareItems;
  throw ArgumentError("unknown cohort '" + std::string(name) + "'");
}

void CohortSpec::validate() const {
  if (rare_item_click_threshold == 0 || cold_start_user_click_threshold == 0) {
    throw ArgumentError("cohort thresholds must be positive");
  }
}

const MetricValues* MetricReport::at(std::size_t k) const {
  for (const auto& v : values) {
    if (v.k == k) return &v;
  }
  return nullptr;
}

CohortCounts CohortCounts::from(const ImplicitDataset& train) {
  return {train.user_click_counts(), train.item_click_counts()};
}

std::vector<MetricReport> evaluate(const FactorModel& model, const ImplicitDataset& split,
                                   const CohortCounts& counts, const EvaluationOptions& options) {
  if (model.num_users() != split.num_users || model.num_items() != split.num_items) {
    throw ArgumentError("model dimensions do not match the evaluation split");
  }
  options.cohort_spec.validate();
  const bool needs_users = std::count(options.cohorts.begin(), options.cohorts.end(),
                                      Cohort::kColdStartUsers) > 0;
  const bool needs_items =
      std::count(options.cohorts.begin(), options.cohorts.end(), Cohort::kRareItems) > 0;
  if (needs_users && counts.user_clicks.size() != split.num_users) {
    throw ArgumentError("cohort user counts do not match the split");
  }
  if (needs_items && counts.item_clicks.size() != split.num_items) {
    throw ArgumentError("cohort item counts do not match the split");
  }

  const auto by_user = split.exposed_by_user();
  std::vector<MetricReport> reports;
  for (Cohort cohort : options.cohorts) {
    MetricReport report;
    report.cohort = cohort;
    std::vector<MetricValues> sums(options.ks.size());
    std::vector<double> scores;
    std::vector<double> relevance;
    for (std::size_t u = 0; u < split.num_users; ++u) {
      const auto& cells = by_user[u];
      if (cells.empty()) continue;
      if (cohort == Cohort::kColdStartUsers &&
          counts.user_clicks[u] >= options.cohort_spec.cold_start_user_click_threshold) {
        continue;
      }
      scores.clear();
      relevance.clear();
      for (std::size_t idx : cells) {
        const Interaction& x = split.exposed[idx];
        scores.push_back(model.score_unchecked(x.user, x.item));
        double rel = options.graded_relevance ? x.relevance_prob : (x.relevant ? 1.0 : 0.0);
        if (cohort == Cohort::kRareItems &&
            counts.item_clicks[x.item] >= options.cohort_spec.rare_item_click_threshold) {
          rel = 0.0;
        }
        relevance.push_back(rel);
      }
      bool included = false;
      for (std::size_t q = 0; q < options.ks.size(); ++q) {
        const auto m = rank_metrics(scores, relevance, options.ks[q]);
        if (!m) break;
        included = true;
        sums[q].dcg += m->dcg;
        sums[q].recall += m->recall;
        sums[q].map += m->ap;
      }
      if (included) ++report.num_users;
    }
    if (report.num_users > 0) {
      const auto n = static_cast<double>(report.num_users);
      for (std::size_t q = 0; q < options.ks.size(); ++q) {
        report.values.push_back(
            {options.ks[q], sums[q].dcg / n, sums[q].recall / n, sums[q].map / n});
      }
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

double mean_dcg(const FactorModel& model, const ImplicitDataset& split, std::size_t k) {
  EvaluationOptions options;
  options.ks = {k};
  const auto reports = evaluate(model, split, {}, options);
  return reports.front().values.empty() ? 0.0 : reports.front().values.front().dcg;
}

void write_reports_tsv(std::ostream& out, std::span<const MetricReport> reports, bool header) {
  if (header) out << "method\trun\tcohort\tmetric\tK\tvalue\n";
  char buf[64];
  for (const auto& r : reports) {
    for (const auto& v : r.values) {
      const std::pair<const char*, double> metrics[] = {
          {"DCG", v.dcg}, {"Recall", v.recall}, {"MAP", v.map}};
      for (const auto& [name, value] : metrics) {
        std::snprintf(buf, sizeof buf, "%.10f", value);
        out << r.method << '\t' << r.run << '\t' << to_string(r.cohort) << '\t' << name << '\t'
            << v.k << '\t' << buf << '\n';
      }
    }
  }
}

}  // namespace upl
