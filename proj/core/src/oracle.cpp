#include "upl/oracle.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <memory>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "upl/errors.hpp"
#include "upl/losses.hpp"
#include "upl/stats.hpp"

namespace upl {
namespace {

// L(f(u,i), f(u,j)) for every user and ordered item pair.
class LossCube {
 public:
  LossCube(const CellTable& scores, const PairLossFn& loss)
      : users_(scores.num_users), items_(scores.num_items), values_(users_ * items_ * items_, 0.0) {
    for (std::size_t u = 0; u < users_; ++u) {
      for (std::size_t i = 0; i < items_; ++i) {
        for (std::size_t j = 0; j < items_; ++j) {
          if (i != j) values_[(u * items_ + i) * items_ + j] = loss(scores(u, i), scores(u, j));
        }
      }
    }
  }

  double operator()(std::size_t u, std::size_t i, std::size_t j) const {
    return values_[(u * items_ + i) * items_ + j];
  }

 private:
  std::size_t users_;
  std::size_t items_;
  std::vector<double> values_;
};

void check_shapes(const SyntheticWorld& world, const CellTable& scores) {
  if (world.gamma.num_users != world.theta.num_users ||
      world.gamma.num_items != world.theta.num_items) {
    throw ArgumentError("theta and gamma tables differ in shape");
  }
  if (scores.num_users != world.num_users() || scores.num_items != world.num_items()) {
    throw ArgumentError("score table does not match the world's shape");
  }
}

double risk_with_cube(const SyntheticWorld& world, const LossCube& cube, OracleEstimator estimator,
                      std::span<const bool> clicks, const EstimatorOptions& options) {
  const std::size_t users = world.num_users();
  const std::size_t items = world.num_items();
  const CellTable& gamma_hat = options.gamma_hat ? *options.gamma_hat : world.gamma;
  double total = 0.0;
  for (std::size_t u = 0; u < users; ++u) {
    for (std::size_t i = 0; i < items; ++i) {
      const bool ci = clicks[u * items + i];
      if (!ci) continue;  // every estimator here vanishes when c_i = 0
      for (std::size_t j = 0; j < items; ++j) {
        if (j == i) continue;
        const bool cj = clicks[u * items + j];
        const double l = cube(u, i, j);
        switch (estimator) {
          case OracleEstimator::kUpl:
            if (!cj) {
              total += upl_pair_weight(world.theta(u, i), world.theta(u, j), gamma_hat(u, j)) * l;
            }
            break;
          case OracleEstimator::kUbpr:
            total += ubpr_pair_weight(true, cj, world.theta(u, i), world.theta(u, j)) * l;
            break;
          case OracleEstimator::kUbprClipped:
            total += clip_term(ubpr_pair_weight(true, cj, world.theta(u, i), world.theta(u, j)) * l,
                               options.clip_threshold);
            break;
          case OracleEstimator::kBpr:
            if (!cj) total += l;
            break;
        }
      }
    }
  }
  return total;
}

// Estimator value for every click mask, bit k = cell k.
std::vector<double> risk_table(const SyntheticWorld& world, const LossCube& cube,
                               OracleEstimator estimator, const EstimatorOptions& options) {
  const std::size_t n = world.cells();
  std::vector<double> table(std::size_t{1} << n);
  const auto clicks = std::make_unique<bool[]>(n);
  for (std::size_t mask = 0; mask < table.size(); ++mask) {
    for (std::size_t k = 0; k < n; ++k) clicks[k] = ((mask >> k) & 1u) != 0;
    table[mask] = risk_with_cube(world, cube, estimator, std::span(clicks.get(), n), options);
  }
  return table;
}

void check_options(const SyntheticWorld& world, OracleEstimator estimator,
                   const EstimatorOptions& options) {
  if (estimator == OracleEstimator::kUbprClipped && options.clip_threshold > 0.0) {
    throw DomainError("clip threshold must be <= 0");
  }
  if (options.gamma_hat) {
    const CellTable& g = *options.gamma_hat;
    if (g.num_users != world.num_users() || g.num_items != world.num_items()) {
      throw ArgumentError("gamma_hat table does not match the world's shape");
    }
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

CellTable CellTable::scores_of(const FactorModel& model) {
  CellTable t(model.num_users(), model.num_items());
  for (std::size_t u = 0; u < model.num_users(); ++u) {
    for (std::size_t i = 0; i < model.num_items(); ++i) {
      t(u, i) = model.score_unchecked(static_cast<UserIndex>(u), static_cast<ItemIndex>(i));
    }
  }
  return t;
}

void SyntheticWorld::validate() const {
  if (theta.num_users != gamma.num_users || theta.num_items != gamma.num_items) {
    throw DomainError("theta and gamma tables differ in shape");
  }
  if (theta.cells() == 0) throw DomainError("world has no cells");
  for (std::size_t k = 0; k < theta.cells(); ++k) {
    const double t = theta.values[k];
    const double g = gamma.values[k];
    if (!(t > 0.0 && t < 1.0)) throw DomainError("theta must lie in (0, 1)");
    if (!(g > 0.0 && g < 1.0)) throw DomainError("gamma must lie in (0, 1)");
  }
}

PairLossFn logistic_pair_loss() {
  return [](double s_i, double s_j) { return sigmoid_pair_loss(s_i, s_j).loss; };
}

std::string_view to_string(OracleEstimator estimator) {
  switch (estimator) {
    case OracleEstimator::kUpl:
      return "upl";
    case OracleEstimator::kUbpr:
      return "ubpr";
    case OracleEstimator::kUbprClipped:
      return "ubpr_clipped";
    case OracleEstimator::kBpr:
      return "bpr";
  }
  return "upl";
}

OracleEstimator parse_oracle_estimator(std::string_view name) {
  if (name == "upl") return OracleEstimator::kUpl;
  if (name == "ubpr" || name == "ubpr_nclip") return OracleEstimator::kUbpr;
  if (name == "ubpr_clipped") return OracleEstimator::kUbprClipped;
  if (name == "bpr") return OracleEstimator::kBpr;
  throw ArgumentError("unknown estimator '" + std::string(name) + "'");
}

double empirical_risk(const SyntheticWorld& world, const CellTable& scores,
                      OracleEstimator estimator, std::span<const bool> clicks,
                      const EstimatorOptions& options, const PairLossFn& loss) {
  check_shapes(world, scores);
  check_options(world, estimator, options);
  if (clicks.size() != world.cells()) throw ArgumentError("click vector size mismatch");
  return risk_with_cube(world, LossCube(scores, loss), estimator, clicks, options);
}

double ideal_risk(const SyntheticWorld& world, const CellTable& scores, const PairLossFn& loss) {
  check_shapes(world, scores);
  CompensatedSum total;
  for (std::size_t u = 0; u < world.num_users(); ++u) {
    for (std::size_t i = 0; i < world.num_items(); ++i) {
      for (std::size_t j = 0; j < world.num_items(); ++j) {
        if (i == j) continue;
        total.add(world.gamma(u, i) * (1.0 - world.gamma(u, j)) * loss(scores(u, i), scores(u, j)));
      }
    }
  }
  return total.value();
}

ExactMoments exact_moments(const SyntheticWorld& world, const CellTable& scores,
                           OracleEstimator estimator, const EstimatorOptions& options,
                           const PairLossFn& loss, unsigned threads) {
  check_shapes(world, scores);
  check_options(world, estimator, options);
  const std::size_t n = world.cells();
  if (n > kMaxExactCells) throw EnumerationBoundError(n, kMaxExactCells);

  const std::vector<double> values = risk_table(world, LossCube(scores, loss), estimator, options);

  // Per-cell probability of each (o, r) outcome; digit = o | (r << 1).
  std::vector<std::array<double, 4>> outcome_prob(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = world.theta.values[k];
    const double g = world.gamma.values[k];
    outcome_prob[k] = {(1 - t) * (1 - g), t * (1 - g), (1 - t) * g, t * g};
  }

  const std::size_t outcomes = std::size_t{1} << (2 * n);
  const std::size_t chunks = std::min<std::size_t>(64, outcomes);
  const std::size_t chunk_len = (outcomes + chunks - 1) / chunks;
  // Probability mass of each click mask, accumulated per chunk.
  std::vector<std::vector<CompensatedSum>> mass(chunks,
                                                std::vector<CompensatedSum>(values.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      const std::size_t begin = c * chunk_len;
      const std::size_t end = std::min(outcomes, begin + chunk_len);
      for (std::size_t t = begin; t < end; ++t) {
        double p = 1.0;
        std::size_t mask = 0;
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t digit = (t >> (2 * k)) & 3u;
          p *= outcome_prob[k][digit];
          if (digit == 3u) mask |= std::size_t{1} << k;  // o = 1 and r = 1
        }
        mass[c][mask].add(p);
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<double> mask_prob(values.size());
  for (std::size_t m = 0; m < values.size(); ++m) {
    CompensatedSum s;
    for (std::size_t c = 0; c < chunks; ++c) s += mass[c][m];
    mask_prob[m] = s.value();
  }
  CompensatedSum expectation;
  for (std::size_t m = 0; m < values.size(); ++m) expectation.add(mask_prob[m] * values[m]);
  ExactMoments out;
  out.expectation = expectation.value();
  CompensatedSum variance;
  for (std::size_t m = 0; m < values.size(); ++m) {
    const double d = values[m] - out.expectation;
    variance.add(mask_prob[m] * d * d);
  }
  out.variance = variance.value();
  out.outcomes = outcomes;
  return out;
}

double exact_expectation(const SyntheticWorld& world, const CellTable& scores,
                         OracleEstimator estimator, const EstimatorOptions& options,
                         const PairLossFn& loss, unsigned threads) {
  return exact_moments(world, scores, estimator, options, loss, threads).expectation;
}

EstimatorReport mc_bias_variance(const SyntheticWorld& world, const CellTable& scores,
                                 OracleEstimator estimator, std::size_t samples, std::uint64_t seed,
                                 const EstimatorOptions& options, const PairLossFn& loss) {
  check_shapes(world, scores);
  check_options(world, estimator, options);
  if (samples < kMinMonteCarloSamples) {
    throw ArgumentError("Monte Carlo needs at least " + std::to_string(kMinMonteCarloSamples) +
                        " samples, got " + std::to_string(samples));
  }
  const std::size_t n = world.cells();
  const LossCube cube(scores, loss);
  std::vector<double> table;
  if (n <= 16) table = risk_table(world, cube, estimator, options);

  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MomentAccumulator acc;
  const auto clicks = std::make_unique<bool[]>(n);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t k = 0; k < n; ++k) {
      const bool o = unif(rng) < world.theta.values[k];
      const bool r = unif(rng) < world.gamma.values[k];
      clicks[k] = o && r;
    }
    if (!table.empty()) {
      std::size_t mask = 0;
      for (std::size_t k = 0; k < n; ++k) mask |= static_cast<std::size_t>(clicks[k]) << k;
      acc.add(table[mask]);
    } else {
      acc.add(risk_with_cube(world, cube, estimator, std::span(clicks.get(), n), options));
    }
  }

  EstimatorReport report;
  report.estimator = std::string(to_string(estimator));
  report.ideal_risk = ideal_risk(world, scores, loss);
  if (n <= kMaxExactCells) {
    const ExactMoments exact = exact_moments(world, scores, estimator, options, loss);
    report.exact_expectation = exact.expectation;
    report.exact_variance = exact.variance;
    report.bias = exact.expectation - report.ideal_risk;
  }
  report.mc_mean = acc.mean();
  report.mc_standard_error = acc.standard_error();
  report.mc_variance = acc.variance();
  report.mc_variance_standard_error = acc.variance_standard_error();
  if (estimator == OracleEstimator::kUpl && !options.gamma_hat) {
    report.closed_form_variance = closed_form_variance_upl(world, scores, loss);
  }
  report.sample_count = samples;
  return report;
}

double closed_form_variance_upl(const SyntheticWorld& world, const CellTable& scores,
                                const PairLossFn& loss) {
  check_shapes(world, scores);
  const LossCube cube(scores, loss);
  const std::size_t items = world.num_items();
  CompensatedSum total;
  for (std::size_t u = 0; u < world.num_users(); ++u) {
    for (std::size_t i = 0; i < items; ++i) {
      const double gi = world.gamma(u, i);
      const double lead = (1.0 / world.theta(u, i) - gi) * gi;
      for (std::size_t j = 0; j < items; ++j) {
        if (j == i) continue;
        const double gj = world.gamma(u, j);
        const double dj = 1.0 - world.theta(u, j) * gj;
        const double lij = cube(u, i, j);
        total.add(lead * (1.0 - gj) * (1.0 - gj) * lij * lij / (dj * dj));
        for (std::size_t k = 0; k < items; ++k) {
          if (k == j || k == i) continue;
          const double gk = world.gamma(u, k);
          const double dk = 1.0 - world.theta(u, k) * gk;
          total.add(lead * (1.0 - gj) * (1.0 - gk) * lij * cube(u, i, k) / (dj * dk));
        }
      }
    }
  }
  return total.value();
}

SyntheticWorld random_world(std::size_t users, std::size_t items, Rng& rng, double theta_lo,
                            double theta_hi, double gamma_lo, double gamma_hi) {
  std::uniform_real_distribution<double> theta(theta_lo, theta_hi);
  std::uniform_real_distribution<double> gamma(gamma_lo, gamma_hi);
  SyntheticWorld world{CellTable(users, items), CellTable(users, items)};
  for (double& v : world.theta.values) v = theta(rng);
  for (double& v : world.gamma.values) v = gamma(rng);
  world.validate();
  return world;
}

VarianceComparison compare_variances(const EstimatorReport& a, const EstimatorReport& b) {
  VarianceComparison out;
  out.ratio = b.mc_variance > 0.0 ? a.mc_variance / b.mc_variance
                                  : std::numeric_limits<double>::infinity();
  const double se = std::hypot(a.mc_variance_standard_error, b.mc_variance_standard_error);
  if (se > 0.0) {
    out.z = (a.mc_variance - b.mc_variance) / se;
    out.p_value = normal_upper_tail(out.z);
  } else {
    out.p_value = a.mc_variance > b.mc_variance ? 0.0 : 1.0;
  }
  return out;
}

bool VerificationResult::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const OracleCheck& c) { return c.passed || c.informational; });
}

VerificationResult verify_world(const SyntheticWorld& world, const CellTable& scores,
                                std::size_t samples, std::uint64_t seed, unsigned threads) {
  world.validate();
  check_shapes(world, scores);
  if (samples == 0) throw ArgumentError("samples must be positive");
  if (world.cells() > kMaxExactCells) throw EnumerationBoundError(world.cells(), kMaxExactCells);
  if (samples < kMinMonteCarloSamples) {
    throw ArgumentError("samples must be at least " + std::to_string(kMinMonteCarloSamples));
  }

  VerificationResult result;
  const double ideal = ideal_risk(world, scores);
  const OracleEstimator estimators[] = {OracleEstimator::kUpl, OracleEstimator::kUbpr,
                                        OracleEstimator::kUbprClipped, OracleEstimator::kBpr};
  for (std::size_t k = 0; k < std::size(estimators); ++k) {
    result.reports.push_back(
        mc_bias_variance(world, scores, estimators[k], samples, seed + k));
  }
  // Threads only affect the enumeration used for the headline checks.
  const double upl_exact = exact_expectation(world, scores, OracleEstimator::kUpl, {},
                                             logistic_pair_loss(), threads);
  const double ubpr_exact = exact_expectation(world, scores, OracleEstimator::kUbpr, {},
                                              logistic_pair_loss(), threads);
  const double clipped_exact = *result.reports[2].exact_expectation;

  auto add = [&](std::string name, bool passed, std::string detail, bool info = false) {
    result.checks.push_back({std::move(name), passed, info, std::move(detail)});
  };
  add("upl_unbiased_exact", std::fabs(upl_exact - ideal) < 1e-10,
      "E[UPL] - R_ideal = " + format_double(upl_exact - ideal));
  add("ubpr_unbiased_exact", std::fabs(ubpr_exact - ideal) < 1e-10,
      "E[UBPR] - R_ideal = " + format_double(ubpr_exact - ideal));
  add("ubpr_clipped_bias_nonnegative", clipped_exact - ideal > -1e-10,
      "E[UBPR clipped at 0] - R_ideal = " + format_double(clipped_exact - ideal));
  for (const auto& r : result.reports) {
    const double gap = std::fabs(*r.exact_expectation - r.mc_mean);
    add("mc_agrees_exact_" + r.estimator, gap < 4.0 * r.mc_standard_error,
        "|exact - mc| = " + format_double(gap) + ", 4 SE = " + format_double(4.0 * r.mc_standard_error));
  }
  const VarianceComparison cmp = compare_variances(result.reports[1], result.reports[0]);
  const bool low_exposure = std::all_of(world.theta.values.begin(), world.theta.values.end(),
                                        [](double t) { return t <= 0.2; });
  add("variance_ubpr_gt_upl", cmp.ratio > 1.0 && cmp.p_value < 0.01,
      "var ratio = " + format_double(cmp.ratio) + ", p = " + format_double(cmp.p_value) +
          (low_exposure ? "" : " (asserted only when every theta <= 0.2)"),
      !low_exposure);
  const auto& upl = result.reports[0];
  add("closed_form_variance_ratio", true,
      "closed form / MC variance = " + format_double(*upl.closed_form_variance / upl.mc_variance) +
          ", closed form / exact variance = " +
          format_double(*upl.closed_form_variance / *upl.exact_variance),
      true);
  return result;
}

void write_reports_tsv(std::ostream& out, std::span<const EstimatorReport> reports) {
  out << "estimator\texact_expectation\texact_variance\tideal_risk\tbias\tmc_mean\tmc_se\t"
         "mc_variance\tmc_variance_se\tclosed_form_variance\tsamples\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  for (const auto& r : reports) {
    out << r.estimator << '\t' << opt(r.exact_expectation) << '\t' << opt(r.exact_variance) << '\t'
        << format_double(r.ideal_risk) << '\t' << opt(r.bias) << '\t' << format_double(r.mc_mean)
        << '\t' << format_double(r.mc_standard_error) << '\t' << format_double(r.mc_variance)
        << '\t' << format_double(r.mc_variance_standard_error) << '\t'
        << opt(r.closed_form_variance) << '\t' << r.sample_count << '\n';
  }
}

void write_summary(std::ostream& out, const VerificationResult& result) {
  for (const auto& c : result.checks) {
    const char* status = c.informational ? "INFO" : (c.passed ? "PASS" : "FAIL");
    out << status << "  " << c.name << "  " << c.detail << '\n';
  }
  out << (result.all_passed() ? "all checks passed" : "some checks FAILED") << '\n';
}

}  // namespace upl
