#pragma once

#include <cstddef>
#include <span>

namespace upl {

struct TTestResult {
  double p_value = 0.5;
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  // Both samples have zero variance; p is 0.5 for equal means, otherwise 0 or 1.
  bool degenerate = false;
};

// Welch two-sample t-test of H1: mean(a) > mean(b). Both samples need >= 2 values.
TTestResult one_tailed_t_test(std::span<const double> a, std::span<const double> b);

// Upper tail of the standard normal, P(Z > z).
double normal_upper_tail(double z);

double mean(std::span<const double> xs);
// Unbiased sample variance; 0 for fewer than two values.
double sample_variance(std::span<const double> xs);

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }
  CompensatedSum& operator+=(const CompensatedSum& other) noexcept;

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

// Streaming mean/variance with third and fourth central moments, used for
// standard errors of a sample variance.
class MomentAccumulator {
 public:
  void add(double x) noexcept;

  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept;  // unbiased
  double standard_error() const noexcept;
  // Large-sample SE of the sample variance: sqrt((m4 - s^4) / n).
  double variance_standard_error() const noexcept;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
  double m4_ = 0.0;
};

}  // namespace upl
