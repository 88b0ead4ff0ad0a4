#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "upl/adam.hpp"
#include "upl/dataset.hpp"
#include "upl/factor_model.hpp"
#include "upl/losses.hpp"
#include "upl/propensity.hpp"
#include "upl/sampler.hpp"

namespace upl {

struct TrainConfig {
  std::size_t dim = 100;
  double lambda = 1e-5;
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 200;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  double init_scale = kDefaultInitScale;
  std::size_t validation_k = 5;
  // Pointwise epochs: 0 means the full user x item grid.
  double pointwise_negative_ratio = 0.0;

  void validate() const;
};

struct EpochRecord {
  std::string method;
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> validation_metric;
  double user_norm = 0.0;  // Frobenius norms after the epoch
  double item_norm = 0.0;
};

// Line-delimited JSON, one object per epoch.
std::string format_epoch_record(const EpochRecord& record);

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainRun {
  TrainConfig config;
  LossSpec loss_spec;
  FactorModel final_model;  // best-validation snapshot
  std::vector<double> validation_curve;
  std::vector<double> loss_curve;
  std::size_t epochs_trained = 0;
  std::size_t best_epoch = 0;
};

// Gradient of a mini-batch objective restricted to the rows it touches.
// Row order is first-touch order within the batch.
struct SparseGradient {
  std::size_t dim = 0;
  std::vector<UserIndex> users;
  std::vector<double> user_grads;  // users.size() x dim
  std::vector<ItemIndex> items;
  std::vector<double> item_grads;  // items.size() x dim
};

struct BatchObjective {
  double loss = 0.0;  // mean per-sample loss + lambda * l2_penalty(touched rows)
  SparseGradient gradient;
};

BatchObjective pairwise_batch_objective(const FactorModel& model, std::span<const PairSample> batch,
                                        const LossSpec& spec, double lambda);
BatchObjective pointwise_batch_objective(const FactorModel& model,
                                         std::span<const PointSample> batch, const LossSpec& spec,
                                         double lambda);

// One Adam step with the given gradient.
void apply_gradient(FactorModel& model, AdamState& adam, const SparseGradient& gradient);

// gamma_hat(u, j) = clamp(sigmoid(score), lo, 1 - lo) from a frozen model.
class RelevanceEstimator {
 public:
  static constexpr double kClamp = 1e-6;

  explicit RelevanceEstimator(FactorModel model) : model_(std::move(model)) {}
  double operator()(UserIndex u, ItemIndex j) const;
  const FactorModel& model() const noexcept { return model_; }
  RelevanceFn as_function() const;

 private:
  FactorModel model_;
};

struct TrainInputs {
  const ImplicitDataset* train = nullptr;
  // Enables early stopping on DCG@validation_k. Without it training runs for
  // max_epochs and returns the last model.
  const ImplicitDataset* validation = nullptr;
  const PropensityTable* propensities = nullptr;
  RelevanceFn gamma_hat;  // required iff method == kUpl
  EpochCallback on_epoch;
};

// Throws ArgumentError on inconsistent inputs and TrainingError when a loss
// becomes non-finite.
TrainRun train(const TrainInputs& inputs, const TrainConfig& config, const LossSpec& spec);

struct PipelineRun {
  TrainRun relevance_model;  // Rel-MF stage
  TrainRun ranker;           // UPL stage
};

// Rel-MF, then UPL with gamma_hat taken from the converged Rel-MF scores.
PipelineRun run_upl_pipeline(const TrainInputs& inputs, const TrainConfig& relmf_config,
                             const TrainConfig& upl_config);

}  // namespace upl
