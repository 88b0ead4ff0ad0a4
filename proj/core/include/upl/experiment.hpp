#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "upl/dataset.hpp"
#include "upl/evaluation.hpp"
#include "upl/experiment_config.hpp"
#include "upl/propensity.hpp"
#include "upl/trainer.hpp"

namespace upl {

struct PreparedData {
  ImplicitDataset train;
  ImplicitDataset validation;
  ImplicitDataset test;
  IdMap user_ids;
  IdMap item_ids;
  PropensityTable propensities;  // from training-split clicks
  CohortCounts counts;           // from training-split clicks
};

// Loads the raw split pair, generates the semi-synthetic train (epsilon_train,
// seed) and test (epsilon_test, seed + 1) splits, holds out validation cells
// (seed + 2) and estimates propensities.
PreparedData prepare_data(const ExperimentConfig& config);

// <dir>/{train,validation,test}/ datasets, user_ids.tsv, item_ids.tsv,
// propensity_click.tsv, propensity_nonclick.tsv
void save_prepared(const PreparedData& data, const std::filesystem::path& dir);
PreparedData load_prepared(const std::filesystem::path& dir, double propensity_power,
                           double propensity_floor);

struct Hyperparams {
  std::size_t dim = 100;
  double lambda = 1e-5;
  std::optional<double> clip;  // ubpr_clipped only

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

TrainConfig make_train_config(const ExperimentConfig& config, const Hyperparams& hp,
                              std::uint64_t seed);
LossSpec make_loss_spec(const ExperimentConfig& config, Method method, const Hyperparams& hp);

// Hyperparameter candidates for `method` (clip grid only for ubpr_clipped).
std::vector<Hyperparams> hyperparameter_grid(const ExperimentConfig& config, Method method);

struct SelectionRecord {
  Method method;
  Hyperparams hp;
  double validation_dcg = 0.0;
  bool selected = false;
};

struct RunRecord {
  Method method;
  int run = 0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
};

struct MethodOutcome {
  Method method;
  std::optional<Hyperparams> selected;
  std::vector<MetricReport> reports;
  std::vector<RunRecord> runs;
  std::optional<std::string> error;
};

struct ExperimentResult {
  std::string config_hash;
  std::filesystem::path dir;
  std::vector<SelectionRecord> selection;
  std::vector<MethodOutcome> outcomes;
};

using ProgressFn = std::function<void(const std::string&)>;

// Grid search on validation DCG@5 per method, then `runs` final trainings with
// seeds seed + r, evaluated on the test split. Writes into config.out:
//   config.txt, selection.tsv, runs.tsv, runs_meta.tsv, errors.tsv,
//   summary.tsv, summary.md, significance.tsv
// A failing method is recorded in errors.tsv; the others still run.
ExperimentResult run_experiment(const ExperimentConfig& config, const ProgressFn& progress = {});

// Runs `count` independent tasks on `threads` workers; task k writes only its
// own slot, so results do not depend on scheduling.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& task);

}  // namespace upl
