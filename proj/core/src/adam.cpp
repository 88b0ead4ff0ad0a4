#include "upl/adam.hpp"

#include <cmath>

#include "upl/errors.hpp"

namespace upl {

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::uint64_t step, const AdamConfig& config) {
  if (step == 0) throw ArgumentError("Adam step counter starts at 1");
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * grads[k];
    v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * grads[k] * grads[k];
    const double m_hat = m[k] / correction1;
    const double v_hat = v[k] / correction2;
    params[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

AdamState::AdamState(const FactorModel& model, AdamConfig config)
    : config_(config),
      dim_(model.dim()),
      m_user_(model.user_factors().size(), 0.0),
      v_user_(model.user_factors().size(), 0.0),
      m_item_(model.item_factors().size(), 0.0),
      v_item_(model.item_factors().size(), 0.0) {
  if (!(config.learning_rate > 0.0)) throw ArgumentError("learning rate must be > 0");
}

void AdamState::apply_user(FactorModel& model, UserIndex u, std::span<const double> grad) {
  const std::size_t offset = static_cast<std::size_t>(u) * dim_;
  adam_update(model.user(u), grad, std::span(m_user_).subspan(offset, dim_),
              std::span(v_user_).subspan(offset, dim_), step_, config_);
}

void AdamState::apply_item(FactorModel& model, ItemIndex i, std::span<const double> grad) {
  const std::size_t offset = static_cast<std::size_t>(i) * dim_;
  adam_update(model.item(i), grad, std::span(m_item_).subspan(offset, dim_),
              std::span(v_item_).subspan(offset, dim_), step_, config_);
}

}  // namespace upl
