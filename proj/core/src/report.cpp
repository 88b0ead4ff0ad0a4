#include "upl/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "upl/errors.hpp"
#include "upl/stats.hpp"

namespace upl {
namespace {

using GroupKey = std::tuple<std::string, std::string, std::string, std::size_t>;

const std::vector<std::string_view>& baseline_order() {
  static const std::vector<std::string_view> order{"wmf", "relmf", "mfdu", "bpr",
                                                   "ubpr_clipped", "ubpr_nclip", "ubpr"};
  return order;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Values per method for one (cohort, metric, K), keyed by method.
using Samples = std::map<std::string, std::vector<double>>;

std::map<std::tuple<std::string, std::string, std::size_t>, Samples> by_cell(
    const std::vector<MetricRow>& rows) {
  std::map<std::tuple<std::string, std::string, std::size_t>, Samples> cells;
  for (const auto& r : rows) cells[{r.cohort, r.metric, r.k}][r.method].push_back(r.value);
  return cells;
}

}  // namespace

std::vector<MetricRow> read_runs_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::vector<MetricRow> rows;
  std::string line;
  std::size_t line_number = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("method\t", 0) != 0) throw ParseError("missing header in " + path.string(), line_number);
      header_seen = true;
      continue;
    }
    std::istringstream fields(line);
    MetricRow row;
    if (!(fields >> row.method >> row.run >> row.cohort >> row.metric >> row.k >> row.value)) {
      throw ParseError("malformed row in " + path.string(), line_number);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<AggregateRow> aggregate(const std::vector<MetricRow>& rows) {
  std::vector<GroupKey> order;
  std::map<GroupKey, std::vector<double>> groups;
  for (const auto& r : rows) {
    GroupKey key{r.method, r.cohort, r.metric, r.k};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(r.value);
  }
  std::vector<AggregateRow> out;
  out.reserve(order.size());
  for (const auto& key : order) {
    const auto& values = groups.at(key);
    AggregateRow row;
    std::tie(row.method, row.cohort, row.metric, row.k) = key;
    row.mean = mean(values);
    row.stddev = std::sqrt(sample_variance(values));
    row.n = values.size();
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<SignificanceRow> significance(const std::vector<MetricRow>& rows) {
  std::vector<SignificanceRow> out;
  for (const auto& [cell, samples] : by_cell(rows)) {
    const auto& [cohort, metric, k] = cell;
    auto test = [&](std::string name, const std::string& a, const std::string& b) {
      const auto& xa = samples.at(a);
      const auto& xb = samples.at(b);
      if (xa.size() < 2 || xb.size() < 2) return;
      const TTestResult t = one_tailed_t_test(xa, xb);
      out.push_back({cohort, metric, k, std::move(name), a, b, t.p_value, t.degenerate});
    };
    if (samples.count("upl")) {
      std::string best;
      double best_mean = 0.0;
      for (auto name : baseline_order()) {
        auto it = samples.find(std::string(name));
        if (it == samples.end()) continue;
        const double m = mean(it->second);
        if (best.empty() || m > best_mean) {
          best = it->first;
          best_mean = m;
        }
      }
      if (!best.empty()) test("upl_vs_best", "upl", best);
    }
    if (samples.count("ubpr_clipped") && samples.count("ubpr_nclip")) {
      test("ubpr_clipped_vs_nclip", "ubpr_clipped", "ubpr_nclip");
    }
  }
  return out;
}

std::string_view display_name(std::string_view method) {
  static const std::map<std::string_view, std::string_view> names{
      {"wmf", "WMF"},   {"relmf", "Rel-MF"},           {"mfdu", "MF-DU"},
      {"bpr", "BPR"},   {"ubpr_clipped", "UBPR"},      {"ubpr_nclip", "UBPR_NClip"},
      {"ubpr", "UBPR (unclipped)"}, {"upl", "UPL"},    {"ideal", "Ideal"}};
  auto it = names.find(method);
  return it == names.end() ? method : it->second;
}

void write_aggregates(const std::filesystem::path& dir, const std::string& stamp) {
  const auto rows = read_runs_tsv(dir / "runs.tsv");
  const auto aggregates = aggregate(rows);
  const auto tests = significance(rows);

  {
    std::ofstream out(dir / "summary.tsv");
    out << stamp << '\n' << "method\tcohort\tmetric\tK\tmean\tstddev\tn\n";
    for (const auto& a : aggregates) {
      out << a.method << '\t' << a.cohort << '\t' << a.metric << '\t' << a.k << '\t'
          << fixed(a.mean, 10) << '\t' << fixed(a.stddev, 10) << '\t' << a.n << '\n';
    }
  }
  {
    std::ofstream out(dir / "significance.tsv");
    out << stamp << '\n' << "cohort\tmetric\tK\ttest\tmethod_a\tmethod_b\tp_value\tdegenerate\n";
    char buf[64];
    for (const auto& s : tests) {
      std::snprintf(buf, sizeof buf, "%.6g", s.p_value);
      out << s.cohort << '\t' << s.metric << '\t' << s.k << '\t' << s.test << '\t' << s.method_a
          << '\t' << s.method_b << '\t' << buf << '\t' << (s.degenerate ? 1 : 0) << '\n';
    }
  }

  // Markdown tables: one per cohort, methods as rows, metric@K as columns.
  std::vector<std::string> cohorts, methods;
  std::vector<std::pair<std::string, std::size_t>> columns;
  std::map<std::tuple<std::string, std::string, std::string, std::size_t>, const AggregateRow*> lookup;
  auto note = [](auto& list, const auto& v) {
    if (std::find(list.begin(), list.end(), v) == list.end()) list.push_back(v);
  };
  for (const auto& metric : {"DCG", "Recall", "MAP"}) {
    for (const auto& a : aggregates) {
      if (a.metric == metric) note(columns, std::pair<std::string, std::size_t>{a.metric, a.k});
    }
  }
  for (const auto& a : aggregates) {
    note(cohorts, a.cohort);
    note(methods, a.method);
    lookup[{a.method, a.cohort, a.metric, a.k}] = &a;
  }
  std::map<std::tuple<std::string, std::string, std::size_t, std::string>, const SignificanceRow*> sig;
  for (const auto& s : tests) sig[{s.cohort, s.metric, s.k, s.test}] = &s;

  std::ofstream md(dir / "summary.md");
  md << "<!-- " << stamp.substr(stamp.rfind('#') == 0 ? 2 : 0) << " -->\n";
  for (const auto& cohort : cohorts) {
    md << "\n## " << cohort << "\n\n| Method |";
    for (const auto& [metric, k] : columns) md << ' ' << metric << '@' << k << " |";
    md << "\n|---|";
    for (std::size_t c = 0; c < columns.size(); ++c) md << "---:|";
    md << '\n';
    for (const auto& method : methods) {
      md << "| " << display_name(method) << " |";
      for (const auto& [metric, k] : columns) {
        auto it = lookup.find({method, cohort, metric, k});
        if (it == lookup.end()) {
          md << " n/a |";
          continue;
        }
        std::string mark;
        if (method == "upl") {
          auto s = sig.find({cohort, metric, k, "upl_vs_best"});
          if (s != sig.end() && s->second->p_value < 0.05) mark = "*";
        } else if (method == "ubpr_nclip") {
          auto s = sig.find({cohort, metric, k, "ubpr_clipped_vs_nclip"});
          if (s != sig.end() && s->second->p_value < 0.05) mark = "-";
        }
        md << ' ' << fixed(it->second->mean, 5) << mark << " |";
      }
      md << '\n';
    }
  }
  md << "\nMeans over runs. `*`: UPL exceeds the best baseline (one-tailed Welch t-test, p < 0.05). "
        "`-`: UBPR_NClip is below clipped UBPR at the same level.\n";
}

}  // namespace upl
