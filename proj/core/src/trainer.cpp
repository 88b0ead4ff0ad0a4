#include "upl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <unordered_map>

#include "upl/errors.hpp"
#include "upl/evaluation.hpp"

namespace upl {
namespace {

// Accumulates per-row gradients in first-touch order.
class GradientBuilder {
 public:
  explicit GradientBuilder(std::size_t dim) { grad_.dim = dim; }

  std::span<double> user(UserIndex u) {
    auto [it, inserted] = user_slot_.try_emplace(u, grad_.users.size());
    if (inserted) {
      grad_.users.push_back(u);
      grad_.user_grads.resize(grad_.user_grads.size() + grad_.dim, 0.0);
    }
    return {grad_.user_grads.data() + it->second * grad_.dim, grad_.dim};
  }

  std::span<double> item(ItemIndex i) {
    auto [it, inserted] = item_slot_.try_emplace(i, grad_.items.size());
    if (inserted) {
      grad_.items.push_back(i);
      grad_.item_grads.resize(grad_.item_grads.size() + grad_.dim, 0.0);
    }
    return {grad_.item_grads.data() + it->second * grad_.dim, grad_.dim};
  }

  // Adds lambda * ||row||^2 for every touched row and returns the penalty.
  double add_regularization(const FactorModel& model, double lambda) {
    double penalty = 0.0;
    for (std::size_t k = 0; k < grad_.users.size(); ++k) {
      const auto row = model.user(grad_.users[k]);
      for (std::size_t d = 0; d < grad_.dim; ++d) {
        penalty += row[d] * row[d];
        grad_.user_grads[k * grad_.dim + d] += 2.0 * lambda * row[d];
      }
    }
    for (std::size_t k = 0; k < grad_.items.size(); ++k) {
      const auto row = model.item(grad_.items[k]);
      for (std::size_t d = 0; d < grad_.dim; ++d) {
        penalty += row[d] * row[d];
        grad_.item_grads[k * grad_.dim + d] += 2.0 * lambda * row[d];
      }
    }
    return lambda * penalty;
  }

  SparseGradient take() { return std::move(grad_); }

 private:
  SparseGradient grad_;
  std::unordered_map<UserIndex, std::size_t> user_slot_;
  std::unordered_map<ItemIndex, std::size_t> item_slot_;
};

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += a * x[k];
}

double frobenius(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return std::sqrt(s);
}

std::uint64_t sampler_seed(std::uint64_t seed) {
  // splitmix64 step so the sampling stream differs from the init stream
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

void TrainConfig::validate() const {
  if (dim == 0) throw ArgumentError("dim must be >= 1");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be > 0");
  if (batch_size == 0) throw ArgumentError("batch_size must be >= 1");
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be >= 0");
  if (max_epochs == 0) throw ArgumentError("max_epochs must be >= 1");
  if (patience == 0) throw ArgumentError("patience must be >= 1");
  if (!(init_scale > 0.0)) throw ArgumentError("init_scale must be > 0");
  if (validation_k == 0) throw ArgumentError("validation_k must be >= 1");
  if (!(pointwise_negative_ratio >= 0.0)) throw ArgumentError("pointwise_negative_ratio must be >= 0");
}

std::string format_epoch_record(const EpochRecord& record) {
  nlohmann::ordered_json j;
  j["method"] = record.method;
  j["epoch"] = record.epoch;
  j["loss"] = record.train_loss;
  if (record.validation_metric) {
    j["validation"] = *record.validation_metric;
  } else {
    j["validation"] = nullptr;
  }
  j["user_norm"] = record.user_norm;
  j["item_norm"] = record.item_norm;
  return j.dump();
}

BatchObjective pairwise_batch_objective(const FactorModel& model, std::span<const PairSample> batch,
                                        const LossSpec& spec, double lambda) {
  GradientBuilder builder(model.dim());
  double total = 0.0;
  const double scale = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  for (const PairSample& s : batch) {
    const auto p = model.user(s.u);
    const auto qi = model.item(s.i);
    const auto qj = model.item(s.j);
    const PairLoss l =
        pair_objective(spec, s, model.score_unchecked(s.u, s.i), model.score_unchecked(s.u, s.j));
    total += l.loss;
    // Touch rows even at zero gradient so regularization covers the batch.
    // Both item rows are registered before any span is taken: registering a
    // row may reallocate the gradient storage.
    builder.item(s.i);
    builder.item(s.j);
    auto gu = builder.user(s.u);
    if (l.d_si == 0.0 && l.d_sj == 0.0) continue;
    auto gi = builder.item(s.i);
    auto gj = builder.item(s.j);
    axpy(scale * l.d_si, qi, gu);
    axpy(scale * l.d_sj, qj, gu);
    axpy(scale * l.d_si, p, gi);
    axpy(scale * l.d_sj, p, gj);
  }
  BatchObjective out;
  out.loss = total * scale + builder.add_regularization(model, lambda);
  out.gradient = builder.take();
  return out;
}

BatchObjective pointwise_batch_objective(const FactorModel& model,
                                         std::span<const PointSample> batch, const LossSpec& spec,
                                         double lambda) {
  GradientBuilder builder(model.dim());
  double total = 0.0;
  const double scale = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  const double weight = spec.wmf_weight.value_or(kDefaultWmfWeight);
  for (const PointSample& s : batch) {
    const PointLoss l = pointwise_loss(spec.method, s.c, model.score_unchecked(s.u, s.i),
                                       s.theta_click, s.theta_nonclick, weight);
    total += l.loss;
    auto gu = builder.user(s.u);
    auto gi = builder.item(s.i);
    axpy(scale * l.d_s, model.item(s.i), gu);
    axpy(scale * l.d_s, model.user(s.u), gi);
  }
  BatchObjective out;
  out.loss = total * scale + builder.add_regularization(model, lambda);
  out.gradient = builder.take();
  return out;
}

void apply_gradient(FactorModel& model, AdamState& adam, const SparseGradient& gradient) {
  adam.begin_step();
  const std::size_t dim = gradient.dim;
  for (std::size_t k = 0; k < gradient.users.size(); ++k) {
    adam.apply_user(model, gradient.users[k],
                    std::span(gradient.user_grads).subspan(k * dim, dim));
  }
  for (std::size_t k = 0; k < gradient.items.size(); ++k) {
    adam.apply_item(model, gradient.items[k],
                    std::span(gradient.item_grads).subspan(k * dim, dim));
  }
}

double RelevanceEstimator::operator()(UserIndex u, ItemIndex j) const {
  return std::clamp(sigmoid(model_.score_unchecked(u, j)), kClamp, 1.0 - kClamp);
}

RelevanceFn RelevanceEstimator::as_function() const {
  auto shared = std::make_shared<const RelevanceEstimator>(*this);
  return [shared](UserIndex u, ItemIndex j) { return (*shared)(u, j); };
}

TrainRun train(const TrainInputs& inputs, const TrainConfig& config, const LossSpec& spec) {
  config.validate();
  spec.validate();
  if (inputs.train == nullptr) throw ArgumentError("train: missing training split");
  if (inputs.propensities == nullptr) throw ArgumentError("train: missing propensity table");
  if (spec.method == Method::kIdeal) {
    throw ArgumentError("the ideal risk needs ground-truth relevance and is not trainable");
  }
  if ((spec.method == Method::kUpl) != static_cast<bool>(inputs.gamma_hat)) {
    throw ArgumentError("gamma_hat must be supplied exactly when training UPL");
  }
  const ImplicitDataset& data = *inputs.train;
  if (inputs.validation != nullptr && (inputs.validation->num_users != data.num_users ||
                                       inputs.validation->num_items != data.num_items)) {
    throw ArgumentError("validation split dimensions differ from training split");
  }

  TrainRun run;
  run.config = config;
  run.loss_spec = spec;
  FactorModel model = init_model(data.num_users, data.num_items, config.dim, config.seed,
                                 config.init_scale);
  AdamState adam(model, AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});
  Rng rng(sampler_seed(config.seed));

  std::optional<PairSampler> pair_sampler;
  std::optional<PointSampler> point_sampler;
  if (is_pairwise(spec.method)) {
    pair_sampler.emplace(data, spec.method, *inputs.propensities, inputs.gamma_hat);
  } else {
    point_sampler.emplace(data, *inputs.propensities, config.pointwise_negative_ratio);
  }

  double best_metric = -1.0;
  std::size_t stale = 0;
  run.final_model = model;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t batches = 0;
    auto check = [&](double loss) {
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batches + 1) + " (" +
                            std::string(to_string(spec.method)) + ")");
      }
    };
    if (pair_sampler) {
      const auto samples = pair_sampler->epoch(rng);
      for (std::size_t start = 0; start < samples.size(); start += config.batch_size) {
        const std::size_t len = std::min(config.batch_size, samples.size() - start);
        const auto obj = pairwise_batch_objective(
            model, std::span(samples).subspan(start, len), spec, config.lambda);
        check(obj.loss);
        apply_gradient(model, adam, obj.gradient);
        loss_sum += obj.loss;
        ++batches;
      }
    } else {
      const auto samples = point_sampler->epoch(rng);
      for (std::size_t start = 0; start < samples.size(); start += config.batch_size) {
        const std::size_t len = std::min(config.batch_size, samples.size() - start);
        const auto obj = pointwise_batch_objective(
            model, std::span(samples).subspan(start, len), spec, config.lambda);
        check(obj.loss);
        apply_gradient(model, adam, obj.gradient);
        loss_sum += obj.loss;
        ++batches;
      }
    }
    if (!model.all_finite()) {
      throw TrainingError("non-finite parameters after epoch " + std::to_string(epoch));
    }

    EpochRecord record;
    record.method = std::string(to_string(spec.method));
    record.epoch = epoch;
    record.train_loss = batches == 0 ? 0.0 : loss_sum / static_cast<double>(batches);
    record.user_norm = frobenius(model.user_factors());
    record.item_norm = frobenius(model.item_factors());
    run.loss_curve.push_back(record.train_loss);
    run.epochs_trained = epoch;

    bool stop = false;
    if (inputs.validation != nullptr) {
      const double metric = mean_dcg(model, *inputs.validation, config.validation_k);
      record.validation_metric = metric;
      run.validation_curve.push_back(metric);
      if (metric > best_metric) {
        best_metric = metric;
        run.best_epoch = epoch;
        run.final_model = model;
        stale = 0;
      } else if (++stale >= config.patience) {
        stop = true;
      }
    } else {
      run.validation_curve.push_back(std::nan(""));
      run.best_epoch = epoch;
    }
    if (inputs.on_epoch) inputs.on_epoch(record);
    if (stop) break;
  }
  if (inputs.validation == nullptr) run.final_model = std::move(model);
  return run;
}

PipelineRun run_upl_pipeline(const TrainInputs& inputs, const TrainConfig& relmf_config,
                             const TrainConfig& upl_config) {
  TrainInputs stage = inputs;
  stage.gamma_hat = {};
  PipelineRun out;
  out.relevance_model = train(stage, relmf_config, LossSpec::relmf());
  const RelevanceEstimator estimator(out.relevance_model.final_model);
  stage.gamma_hat = estimator.as_function();
  out.ranker = train(stage, upl_config, LossSpec::upl());
  return out;
}

}  // namespace upl
