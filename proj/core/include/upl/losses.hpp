#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "upl/dataset.hpp"

namespace upl {

// Learning objectives. kUbpr and kUbprNclip both denote the raw (unclipped)
// UBPR estimator; kUbprNclip exists so experiment tables can name the
// "no clipping" row explicitly. kUbprClipped is the practical non-negative
// variant with a tuned threshold.
enum class Method { kIdeal, kBpr, kUbpr, kUbprNclip, kUbprClipped, kUpl, kWmf, kRelmf, kMfdu };

Method parse_method(std::string_view name);
std::string_view to_string(Method method);
bool is_pairwise(Method method) noexcept;
bool is_pointwise(Method method) noexcept;
const std::vector<Method>& all_methods();

inline constexpr double kDefaultWmfWeight = 10.0;

struct LossSpec {
  Method method = Method::kBpr;
  std::optional<double> clip_threshold;  // kUbprClipped only, in [-10, 0]
  std::optional<double> wmf_weight;      // kWmf only, >= 1

  static LossSpec bpr() { return {Method::kBpr, std::nullopt, std::nullopt}; }
  static LossSpec ubpr() { return {Method::kUbpr, std::nullopt, std::nullopt}; }
  static LossSpec ubpr_clipped(double threshold) { return {Method::kUbprClipped, threshold, std::nullopt}; }
  static LossSpec upl() { return {Method::kUpl, std::nullopt, std::nullopt}; }
  static LossSpec relmf() { return {Method::kRelmf, std::nullopt, std::nullopt}; }
  static LossSpec wmf(double weight = kDefaultWmfWeight) { return {Method::kWmf, std::nullopt, weight}; }
  static LossSpec mfdu() { return {Method::kMfdu, std::nullopt, std::nullopt}; }

  // Throws ArgumentError when method-specific fields are missing, superfluous
  // or out of range.
  void validate() const;
};

struct PairLoss {
  double loss = 0.0;
  double d_si = 0.0;  // d loss / d s_i
  double d_sj = 0.0;  // d loss / d s_j
};

struct PointLoss {
  double loss = 0.0;
  double d_s = 0.0;
};

// One (user, positive, other) triple. c_i = 1 always.
struct PairSample {
  UserIndex u = 0;
  ItemIndex i = 0;
  ItemIndex j = 0;
  bool c_j = false;
  double theta_i = 1.0;
  double theta_j = 1.0;
  double gamma_hat_j = 0.0;
};

struct PointSample {
  UserIndex u = 0;
  ItemIndex i = 0;
  bool c = false;
  double theta_click = 1.0;
  double theta_nonclick = 1.0;
};

double sigmoid(double x) noexcept;
// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

// -log sigmoid(s_i - s_j) with its gradients.
PairLoss sigmoid_pair_loss(double s_i, double s_j) noexcept;

// (1 - gamma_j) / (theta_i (1 - theta_j gamma_j)).
double upl_pair_weight(double theta_i, double theta_j, double gamma_hat_j);

// theta_minus_j / (theta_i theta_j); equal to upl_pair_weight when
// theta_minus_j = posterior_exposure(theta_j, gamma_j).
double upl_pair_weight_from_posterior(double theta_i, double theta_j, double theta_minus_j);

// (c_i / theta_i)(1 - c_j / theta_j). Negative when c_j = 1 and theta_j < 1.
double ubpr_pair_weight(bool c_i, bool c_j, double theta_i, double theta_j);

// max(weighted_loss, threshold), threshold <= 0.
double clip_term(double weighted_loss, double threshold);

// Weighted per-pair contribution under `spec`, with gradients w.r.t. the scores.
// kIdeal and kBpr use weight 1; kUpl ignores pairs with c_j = 1.
PairLoss pair_objective(const LossSpec& spec, const PairSample& sample, double s_i, double s_j);

// With p = sigmoid(s) for the raw score s:
// WMF:    weight c (-log p) + (1 - c)(-log(1 - p))
// Rel-MF: (c / tc)(-log p) + (1 - c / tc)(-log(1 - p))
// MF-DU:  c [(1 / tc)(-log p) + (1 - 1 / tc)(-log(1 - p))] + (1 - c)(1 / tn)(-log(1 - p))
// where tc = theta_click, tn = theta_nonclick. d_s is the derivative w.r.t. s.
PointLoss pointwise_loss(Method method, bool c, double s, double theta_click,
                         double theta_nonclick, double weight = kDefaultWmfWeight);

}  // namespace upl
