#include "upl/losses.hpp"

#include <cmath>

#include "upl/errors.hpp"

namespace upl {
namespace {

struct MethodName {
  Method method;
  std::string_view name;
};

constexpr MethodName kMethodNames[] = {
    {Method::kIdeal, "ideal"},           {Method::kBpr, "bpr"},
    {Method::kUbpr, "ubpr"},             {Method::kUbprNclip, "ubpr_nclip"},
    {Method::kUbprClipped, "ubpr_clipped"}, {Method::kUpl, "upl"},
    {Method::kWmf, "wmf"},               {Method::kRelmf, "relmf"},
    {Method::kMfdu, "mfdu"},
};

void require_positive(double theta, const char* what) {
  if (!(theta > 0.0)) throw SingularityError(std::string(what) + " must be > 0");
}

}  // namespace

Method parse_method(std::string_view name) {
  for (const auto& m : kMethodNames) {
    if (m.name == name) return m.method;
  }
  throw ArgumentError("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Method method) {
  for (const auto& m : kMethodNames) {
    if (m.method == method) return m.name;
  }
  return "unknown";
}

bool is_pairwise(Method method) noexcept {
  switch (method) {
    case Method::kIdeal:
    case Method::kBpr:
    case Method::kUbpr:
    case Method::kUbprNclip:
    case Method::kUbprClipped:
    case Method::kUpl:
      return true;
    default:
      return false;
  }
}

bool is_pointwise(Method method) noexcept { return !is_pairwise(method); }

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> out;
    for (const auto& m : kMethodNames) out.push_back(m.method);
    return out;
  }();
  return methods;
}

void LossSpec::validate() const {
  if (method == Method::kUbprClipped) {
    if (!clip_threshold) throw ArgumentError("ubpr_clipped requires clip_threshold");
    if (!(*clip_threshold >= -10.0 && *clip_threshold <= 0.0)) {
      throw ArgumentError("clip_threshold must lie in [-10, 0]");
    }
  } else if (clip_threshold) {
    throw ArgumentError("clip_threshold is only valid for ubpr_clipped");
  }
  if (method == Method::kWmf) {
    if (!wmf_weight) throw ArgumentError("wmf requires wmf_weight");
    if (!(*wmf_weight >= 1.0) || !std::isfinite(*wmf_weight)) {
      throw ArgumentError("wmf_weight must be >= 1");
    }
  } else if (wmf_weight) {
    throw ArgumentError("wmf_weight is only valid for wmf");
  }
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

PairLoss sigmoid_pair_loss(double s_i, double s_j) noexcept {
  const double diff = s_i - s_j;
  const double g = sigmoid(-diff);  // 1 - sigmoid(diff)
  return {softplus(-diff), -g, g};
}

double upl_pair_weight(double theta_i, double theta_j, double gamma_hat_j) {
  require_positive(theta_i, "theta_i");
  const double denominator = 1.0 - theta_j * gamma_hat_j;
  if (!(denominator > 0.0)) throw SingularityError("UPL weight undefined at theta_j * gamma_j >= 1");
  return (1.0 - gamma_hat_j) / (theta_i * denominator);
}

double upl_pair_weight_from_posterior(double theta_i, double theta_j, double theta_minus_j) {
  require_positive(theta_i, "theta_i");
  require_positive(theta_j, "theta_j");
  return theta_minus_j / (theta_i * theta_j);
}

double ubpr_pair_weight(bool c_i, bool c_j, double theta_i, double theta_j) {
  require_positive(theta_i, "theta_i");
  require_positive(theta_j, "theta_j");
  const double left = c_i ? 1.0 / theta_i : 0.0;
  const double right = 1.0 - (c_j ? 1.0 / theta_j : 0.0);
  return left * right;
}

double clip_term(double weighted_loss, double threshold) {
  if (threshold > 0.0) throw DomainError("clip threshold must be <= 0");
  return weighted_loss < threshold ? threshold : weighted_loss;
}

PairLoss pair_objective(const LossSpec& spec, const PairSample& sample, double s_i, double s_j) {
  const PairLoss base = sigmoid_pair_loss(s_i, s_j);
  double weight = 1.0;
  switch (spec.method) {
    case Method::kIdeal:
    case Method::kBpr:
      break;
    case Method::kUbpr:
    case Method::kUbprNclip:
      weight = ubpr_pair_weight(true, sample.c_j, sample.theta_i, sample.theta_j);
      break;
    case Method::kUbprClipped: {
      weight = ubpr_pair_weight(true, sample.c_j, sample.theta_i, sample.theta_j);
      const double threshold = spec.clip_threshold.value_or(0.0);
      const double weighted = weight * base.loss;
      if (weighted < threshold) return {clip_term(weighted, threshold), 0.0, 0.0};
      break;
    }
    case Method::kUpl:
      if (sample.c_j) return {};
      weight = upl_pair_weight(sample.theta_i, sample.theta_j, sample.gamma_hat_j);
      break;
    default:
      throw ArgumentError("pair_objective called with pointwise method " +
                          std::string(to_string(spec.method)));
  }
  return {weight * base.loss, weight * base.d_si, weight * base.d_sj};
}

PointLoss pointwise_loss(Method method, bool c, double s, double theta_click,
                         double theta_nonclick, double weight) {
  // -log sigmoid(s) = softplus(-s), derivative -sigmoid(-s)
  // -log(1 - sigmoid(s)) = softplus(s), derivative sigmoid(s)
  const double pos_loss = softplus(-s);
  const double pos_grad = -sigmoid(-s);
  const double neg_loss = softplus(s);
  const double neg_grad = sigmoid(s);
  const double cv = c ? 1.0 : 0.0;

  double a = 0.0;  // coefficient on the positive term
  double b = 0.0;  // coefficient on the negative term
  switch (method) {
    case Method::kWmf:
      a = weight * cv;
      b = 1.0 - cv;
      break;
    case Method::kRelmf:
      require_positive(theta_click, "theta_click");
      a = cv / theta_click;
      b = 1.0 - cv / theta_click;
      break;
    case Method::kMfdu:
      if (c) {
        require_positive(theta_click, "theta_click");
        a = 1.0 / theta_click;
        b = 1.0 - 1.0 / theta_click;
      } else {
        require_positive(theta_nonclick, "theta_nonclick");
        b = 1.0 / theta_nonclick;
      }
      break;
    default:
      throw ArgumentError("pointwise_loss called with pairwise method " +
                          std::string(to_string(method)));
  }
  return {a * pos_loss + b * neg_loss, a * pos_grad + b * neg_grad};
}

}  // namespace upl
