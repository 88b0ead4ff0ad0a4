#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "upl/factor_model.hpp"
#include "upl/sampler.hpp"

namespace upl {

// Dense per-(user, item) table, row-major.
struct CellTable {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<double> values;

  CellTable() = default;
  CellTable(std::size_t users, std::size_t items, double fill = 0.0)
      : num_users(users), num_items(items), values(users * items, fill) {}

  double operator()(std::size_t u, std::size_t i) const { return values[u * num_items + i]; }
  double& operator()(std::size_t u, std::size_t i) { return values[u * num_items + i]; }
  std::size_t cells() const noexcept { return values.size(); }

  static CellTable scores_of(const FactorModel& model);
};

// A small world where exposure o ~ Bern(theta) and relevance r ~ Bern(gamma)
// are independent across cells and of each other, and c = o * r.
struct SyntheticWorld {
  CellTable theta;
  CellTable gamma;

  std::size_t num_users() const noexcept { return theta.num_users; }
  std::size_t num_items() const noexcept { return theta.num_items; }
  std::size_t cells() const noexcept { return theta.cells(); }

  // All probabilities in (0, 1) and theta * gamma < 1. Throws DomainError.
  void validate() const;
};

inline constexpr std::size_t kMaxExactCells = 10;

// L(s_i, s_j); defaults to -log sigmoid(s_i - s_j).
using PairLossFn = std::function<double(double, double)>;
PairLossFn logistic_pair_loss();

enum class OracleEstimator { kUpl, kUbpr, kUbprClipped, kBpr };

std::string_view to_string(OracleEstimator estimator);
OracleEstimator parse_oracle_estimator(std::string_view name);

struct EstimatorOptions {
  double clip_threshold = 0.0;  // kUbprClipped
  // kUpl: relevance estimate used in the weights; ground-truth gamma when unset.
  std::optional<CellTable> gamma_hat;
};

// Full-batch empirical risk of `estimator` for one click realization.
// clicks[u * num_items + i] is c_{u,i}. Sums run over ordered pairs i != j.
double empirical_risk(const SyntheticWorld& world, const CellTable& scores,
                      OracleEstimator estimator, std::span<const bool> clicks,
                      const EstimatorOptions& options = {},
                      const PairLossFn& loss = logistic_pair_loss());

// sum_u sum_{i != j} gamma_ui (1 - gamma_uj) L(f(u,i), f(u,j))
double ideal_risk(const SyntheticWorld& world, const CellTable& scores,
                  const PairLossFn& loss = logistic_pair_loss());

struct ExactMoments {
  double expectation = 0.0;
  double variance = 0.0;
  std::size_t outcomes = 0;  // 4^cells joint (o, r) outcomes visited
};

// Enumerates every joint (o, r) outcome. Throws EnumerationBoundError when the
// world has more than kMaxExactCells cells. The reduction order is fixed, so
// the result does not depend on `threads`.
ExactMoments exact_moments(const SyntheticWorld& world, const CellTable& scores,
                           OracleEstimator estimator, const EstimatorOptions& options = {},
                           const PairLossFn& loss = logistic_pair_loss(), unsigned threads = 1);

double exact_expectation(const SyntheticWorld& world, const CellTable& scores,
                         OracleEstimator estimator, const EstimatorOptions& options = {},
                         const PairLossFn& loss = logistic_pair_loss(), unsigned threads = 1);

struct EstimatorReport {
  std::string estimator;
  std::optional<double> exact_expectation;  // when the world is enumerable
  std::optional<double> exact_variance;
  double ideal_risk = 0.0;
  std::optional<double> bias;  // exact_expectation - ideal_risk
  double mc_mean = 0.0;
  double mc_standard_error = 0.0;
  double mc_variance = 0.0;
  double mc_variance_standard_error = 0.0;
  std::optional<double> closed_form_variance;  // UPL only
  std::size_t sample_count = 0;
};

inline constexpr std::size_t kMinMonteCarloSamples = 10'000;

// Draws `samples` independent (o, r) realizations. Throws ArgumentError when
// samples < kMinMonteCarloSamples.
EstimatorReport mc_bias_variance(const SyntheticWorld& world, const CellTable& scores,
                                 OracleEstimator estimator, std::size_t samples, std::uint64_t seed,
                                 const EstimatorOptions& options = {},
                                 const PairLossFn& loss = logistic_pair_loss());

// The two-sum UPL variance expression evaluated over all admissible index
// tuples (i != j for the first sum; distinct i, j, k for the second).
double closed_form_variance_upl(const SyntheticWorld& world, const CellTable& scores,
                                const PairLossFn& loss = logistic_pair_loss());

// Uniform theta in [theta_lo, theta_hi], gamma in [gamma_lo, gamma_hi].
SyntheticWorld random_world(std::size_t users, std::size_t items, Rng& rng, double theta_lo,
                            double theta_hi, double gamma_lo, double gamma_hi);

struct VarianceComparison {
  double ratio = 0.0;    // var(a) / var(b)
  double z = 0.0;        // (var(a) - var(b)) / sqrt(se_a^2 + se_b^2)
  double p_value = 1.0;  // one-sided, H1: var(a) > var(b)
};

VarianceComparison compare_variances(const EstimatorReport& a, const EstimatorReport& b);

struct OracleCheck {
  std::string name;
  bool passed = false;
  bool informational = false;  // reported, never fails the suite
  std::string detail;
};

struct VerificationResult {
  std::vector<EstimatorReport> reports;
  std::vector<OracleCheck> checks;

  bool all_passed() const;
};

// Exact unbiasedness of UPL and unclipped UBPR, non-negative bias of clipped
// UBPR, exact/Monte Carlo agreement within 4 SE, and (for worlds with every
// theta <= 0.2) the variance ordering var(UBPR) > var(UPL) at p < 0.01.
VerificationResult verify_world(const SyntheticWorld& world, const CellTable& scores,
                                std::size_t samples, std::uint64_t seed, unsigned threads = 1);

void write_reports_tsv(std::ostream& out, std::span<const EstimatorReport> reports);
void write_summary(std::ostream& out, const VerificationResult& result);

}  // namespace upl
