#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "upl/factor_model.hpp"

namespace upl {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// In-place Adam update of `params` at (1-based) step `step`.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::uint64_t step, const AdamConfig& config);

// Row-sparse ("lazy") Adam over a FactorModel: only rows that received a
// gradient in the current step have their moments and values updated; the
// bias correction uses the global step count.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const FactorModel& model, AdamConfig config);

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t step() const noexcept { return step_; }

  // Advances the global step. Call once per mini-batch before apply_*.
  void begin_step() noexcept { ++step_; }

  void apply_user(FactorModel& model, UserIndex u, std::span<const double> grad);
  void apply_item(FactorModel& model, ItemIndex i, std::span<const double> grad);

  std::span<const double> user_first_moment() const noexcept { return m_user_; }
  std::span<const double> user_second_moment() const noexcept { return v_user_; }
  std::span<const double> item_first_moment() const noexcept { return m_item_; }
  std::span<const double> item_second_moment() const noexcept { return v_item_; }

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> m_user_, v_user_, m_item_, v_item_;
};

}  // namespace upl
