#include "upl/stats.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "upl/errors.hpp"

namespace upl {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value() / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  CompensatedSum s;
  for (double x : xs) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(xs.size() - 1);
}

double normal_upper_tail(double z) {
  return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), z));
}

TTestResult one_tailed_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DomainError("t-test needs at least 2 values per sample");
  const double mean_a = mean(a);
  const double mean_b = mean(b);
  const double se_a = sample_variance(a) / static_cast<double>(a.size());
  const double se_b = sample_variance(b) / static_cast<double>(b.size());
  const double se2 = se_a + se_b;

  TTestResult result;
  if (!(se2 > 0.0)) {
    result.degenerate = true;
    result.p_value = mean_a == mean_b ? 0.5 : (mean_a > mean_b ? 0.0 : 1.0);
    return result;
  }
  result.t_statistic = (mean_a - mean_b) / std::sqrt(se2);
  // Welch-Satterthwaite
  const double df_den =
      se_a * se_a / static_cast<double>(a.size() - 1) + se_b * se_b / static_cast<double>(b.size() - 1);
  result.degrees_of_freedom = se2 * se2 / df_den;
  boost::math::students_t_distribution<double> dist(result.degrees_of_freedom);
  result.p_value = boost::math::cdf(boost::math::complement(dist, result.t_statistic));
  return result;
}

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::fabs(sum_) >= std::fabs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

CompensatedSum& CompensatedSum::operator+=(const CompensatedSum& other) noexcept {
  add(other.sum_);
  add(other.compensation_);
  return *this;
}

void MomentAccumulator::add(double x) noexcept {
  // Terriberry's online update for central moments.
  const double n1 = static_cast<double>(n_);
  ++n_;
  const double n = static_cast<double>(n_);
  const double delta = x - mean_;
  const double delta_n = delta / n;
  const double delta_n2 = delta_n * delta_n;
  const double term1 = delta * delta_n * n1;
  mean_ += delta_n;
  m4_ += term1 * delta_n2 * (n * n - 3 * n + 3) + 6 * delta_n2 * m2_ - 4 * delta_n * m3_;
  m3_ += term1 * delta_n * (n - 2) - 3 * delta_n * m2_;
  m2_ += term1;
}

double MomentAccumulator::variance() const noexcept {
  return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1);
}

double MomentAccumulator::standard_error() const noexcept {
  return n_ == 0 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
}

double MomentAccumulator::variance_standard_error() const noexcept {
  if (n_ < 2) return 0.0;
  const double n = static_cast<double>(n_);
  const double mu2 = m2_ / n;
  const double mu4 = m4_ / n;
  return std::sqrt(std::max(0.0, mu4 - mu2 * mu2) / n);
}

}  // namespace upl
