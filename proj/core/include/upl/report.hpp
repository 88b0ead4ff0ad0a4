#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace upl {

// One line of runs.tsv.
struct MetricRow {
  std::string method;
  int run = 0;
  std::string cohort;
  std::string metric;  // DCG, Recall, MAP
  std::size_t k = 0;
  double value = 0.0;
};

std::vector<MetricRow> read_runs_tsv(const std::filesystem::path& path);

struct AggregateRow {
  std::string method;
  std::string cohort;
  std::string metric;
  std::size_t k = 0;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

// Groups by (method, cohort, metric, K) in first-appearance order.
std::vector<AggregateRow> aggregate(const std::vector<MetricRow>& rows);

struct SignificanceRow {
  std::string cohort;
  std::string metric;
  std::size_t k = 0;
  std::string test;        // "upl_vs_best" or "ubpr_clipped_vs_nclip"
  std::string method_a;    // hypothesis: mean(a) > mean(b)
  std::string method_b;
  double p_value = 0.5;
  bool degenerate = false;
};

std::vector<SignificanceRow> significance(const std::vector<MetricRow>& rows);

std::string_view display_name(std::string_view method);

// Reads <dir>/runs.tsv and rewrites summary.tsv, summary.md and
// significance.tsv. `stamp` is written as a leading comment line.
void write_aggregates(const std::filesystem::path& dir, const std::string& stamp);

}  // namespace upl
