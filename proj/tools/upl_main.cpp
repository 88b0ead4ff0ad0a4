#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <list>
#include <sstream>
#include <string>
#include <vector>

#include "upl/errors.hpp"
#include "upl/experiment.hpp"
#include "upl/oracle.hpp"
#include "upl/report.hpp"
#include "upl/world_spec.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Flags shared by prepare, train and experiment. Each flag maps onto one
// config key and is applied after --config and --grid-file.
struct ConfigFlags {
  std::string config_file;
  std::string grid_file;
  std::vector<std::string> assignments;

  void attach(CLI::App& app, bool with_methods) {
    app.add_option("--config", config_file, "key=value configuration file")->check(CLI::ExistingFile);
    app.add_option("--grid-file", grid_file, "key=value file with grid_dim, grid_lambda, grid_clip")
        ->check(CLI::ExistingFile);
    app.add_option("--set", assignments, "extra key=value assignment (repeatable)");
    add(app, "--dataset", "dataset", "directory with the raw train/test files");
    add(app, "--format", "format", "dense (train.ascii/test.ascii) or triplets");
    if (with_methods) add(app, "--methods", "methods", "comma-separated method names");
    add(app, "--runs", "runs", "final runs per method");
    add(app, "--seed", "seed", "base seed");
    add(app, "--epsilon-train", "epsilon_train", "relevance noise floor for the training split");
    add(app, "--epsilon-test", "epsilon_test", "relevance noise floor for the test split");
    add(app, "--out", "out", "output directory");
    add(app, "--threads", "threads", "worker threads");
  }

  void add(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
    values_.emplace_back(key, std::string{});
    auto* opt = app.add_option(flag, values_.back().second, help);
    options_.push_back(opt);
  }

  upl::ExperimentConfig build() const {
    upl::ExperimentConfig config;
    if (!config_file.empty()) upl::load_config_file(config, config_file);
    if (!grid_file.empty()) {
      upl::ExperimentConfig grid;
      upl::load_config_file(grid, grid_file);
      std::ifstream in(grid_file);
      std::string line;
      std::size_t n = 0;
      while (std::getline(in, line)) {
        ++n;
        const auto eq = line.find('=');
        if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
        const std::string key = line.substr(0, line.find_first_of(" \t="));
        if (key.rfind("grid_", 0) != 0) {
          throw upl::ArgumentError(grid_file + ":" + std::to_string(n) + ": grid files accept only grid_* keys, got '" + key + "'");
        }
      }
      config.grid_dim = grid.grid_dim;
      config.grid_lambda = grid.grid_lambda;
      config.grid_clip = grid.grid_clip;
    }
    for (const auto& a : assignments) {
      const auto eq = a.find('=');
      if (eq == std::string::npos) throw upl::ArgumentError("--set expects key=value, got '" + a + "'");
      upl::apply_config_value(config, a.substr(0, eq), a.substr(eq + 1));
    }
    auto opt = options_.begin();
    for (const auto& [key, value] : values_) {
      if ((*opt++)->count() > 0) upl::apply_config_value(config, key, value);
    }
    config.validate();
    return config;
  }

 private:
  std::list<std::pair<std::string, std::string>> values_;
  std::vector<CLI::Option*> options_;
};

void write_stamped_config(const upl::ExperimentConfig& config) {
  std::filesystem::create_directories(config.out);
  std::ofstream out(config.out / "config.txt");
  out << "# config_hash=" << config.hash() << " seed=" << config.seed << '\n'
      << config.canonical_text();
}

int run_prepare(const ConfigFlags& flags) {
  const auto config = flags.build();
  const auto data = upl::prepare_data(config);
  upl::save_prepared(data, config.out);
  write_stamped_config(config);
  std::printf("wrote %s: %zu users, %zu items, %zu train / %zu validation / %zu test cells\n",
              config.out.string().c_str(), data.train.num_users, data.train.num_items,
              data.train.exposed.size(), data.validation.exposed.size(), data.test.exposed.size());
  return 0;
}

struct TrainFlags {
  std::string method = "upl";
  std::string prepared;
  std::size_t dim = 100;
  double lambda = 1e-5;
  double clip = 0.0;
  std::size_t relmf_dim = 100;
  double relmf_lambda = 1e-5;
  int run = 0;
};

int run_train(const ConfigFlags& flags, const TrainFlags& tf) {
  const auto config = flags.build();
  const upl::Method method = upl::parse_method(tf.method);
  const upl::PreparedData data =
      tf.prepared.empty()
          ? upl::prepare_data(config)
          : upl::load_prepared(tf.prepared, config.propensity_power, config.propensity_floor);
  std::filesystem::create_directories(config.out);
  write_stamped_config(config);

  std::ofstream log(config.out / "epochs.jsonl");
  upl::TrainInputs inputs;
  inputs.train = &data.train;
  inputs.validation = &data.validation;
  inputs.propensities = &data.propensities;
  inputs.on_epoch = [&](const upl::EpochRecord& r) {
    log << upl::format_epoch_record(r) << '\n';
    std::fprintf(stderr, "%s epoch %zu loss %.6f\n", r.method.c_str(), r.epoch, r.train_loss);
  };

  const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(tf.run);
  const upl::Hyperparams hp{tf.dim, tf.lambda,
                            method == upl::Method::kUbprClipped ? std::optional<double>(tf.clip)
                                                                : std::nullopt};
  upl::TrainRun run;
  if (method == upl::Method::kUpl) {
    run = upl::run_upl_pipeline(inputs,
                                upl::make_train_config(config, {tf.relmf_dim, tf.relmf_lambda, {}}, seed),
                                upl::make_train_config(config, hp, seed))
              .ranker;
  } else {
    run = upl::train(inputs, upl::make_train_config(config, hp, seed),
                     upl::make_loss_spec(config, method, hp));
  }
  upl::save_checkpoint(run.final_model, config.out / "model.bin");

  upl::EvaluationOptions eval;
  eval.ks = config.ks;
  eval.cohort_spec = {config.rare_item_threshold, config.cold_start_threshold};
  eval.graded_relevance = config.graded_relevance;
  if (config.cohorts) {
    eval.cohorts = {upl::Cohort::kAll, upl::Cohort::kColdStartUsers, upl::Cohort::kRareItems};
  }
  auto reports = upl::evaluate(run.final_model, data.test, data.counts, eval);
  for (auto& r : reports) {
    r.method = std::string(upl::to_string(method));
    r.run = tf.run;
  }
  std::ofstream metrics(config.out / "metrics.tsv");
  upl::write_reports_tsv(metrics, reports);
  upl::write_reports_tsv(std::cout, reports);
  std::fprintf(stderr, "best epoch %zu of %zu\n", run.best_epoch, run.epochs_trained);
  return 0;
}

int run_experiment(const ConfigFlags& flags) {
  const auto config = flags.build();
  const auto result = upl::run_experiment(
      config, [](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); });
  std::size_t failed = 0;
  for (const auto& o : result.outcomes) {
    if (o.error) {
      ++failed;
      std::fprintf(stderr, "method %s failed: %s\n", std::string(upl::to_string(o.method)).c_str(),
                   o.error->c_str());
    }
  }
  std::ifstream md(result.dir / "summary.md");
  std::cout << md.rdbuf();
  std::printf("\nconfig hash %s, results in %s\n", result.config_hash.c_str(),
              result.dir.string().c_str());
  return failed == result.outcomes.size() && failed > 0 ? kExitFailure : 0;
}

struct VerifyFlags {
  std::string world = UPL_DEFAULT_WORLD;
  std::size_t samples = 100'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out;
};

int run_verify(const VerifyFlags& vf) {
  if (vf.samples == 0) throw upl::ArgumentError("--samples must be positive");
  const upl::WorldSpec spec = upl::load_world_spec(vf.world);
  const auto result = upl::verify_world(spec.world, spec.scores, vf.samples, vf.seed, vf.threads);
  upl::write_summary(std::cout, result);
  if (!vf.out.empty()) {
    std::filesystem::create_directories(vf.out);
    std::ofstream tsv(std::filesystem::path(vf.out) / "estimators.tsv");
    upl::write_reports_tsv(tsv, result.reports);
    std::ofstream summary(std::filesystem::path(vf.out) / "summary.txt");
    upl::write_summary(summary, result);
  }
  return result.all_passed() ? 0 : kExitFailure;
}

int run_report(const std::string& dir) {
  std::ifstream in(std::filesystem::path(dir) / "runs.tsv");
  if (!in) throw upl::ArgumentError("no runs.tsv in " + dir);
  std::string stamp;
  std::getline(in, stamp);
  if (stamp.rfind("#", 0) != 0) stamp = "# unstamped";
  upl::write_aggregates(dir, stamp);
  std::ifstream md(std::filesystem::path(dir) / "summary.md");
  std::cout << md.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unbiased pairwise learning from implicit feedback"};
  app.require_subcommand(1);

  ConfigFlags prepare_flags, train_flags, experiment_flags;
  auto* prepare = app.add_subcommand("prepare", "generate semi-synthetic splits and propensities");
  prepare_flags.attach(*prepare, false);

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "train one method once and evaluate it");
  train_flags.attach(*train, false);
  train->add_option("--method", tf.method, "method name")->capture_default_str();
  train->add_option("--prepared", tf.prepared, "directory written by `prepare`");
  train->add_option("--dim", tf.dim, "latent dimension")->capture_default_str();
  train->add_option("--lambda", tf.lambda, "L2 weight")->capture_default_str();
  train->add_option("--clip", tf.clip, "clipping threshold (ubpr_clipped)")->capture_default_str();
  train->add_option("--relmf-dim", tf.relmf_dim, "Rel-MF dimension for the upl pipeline")
      ->capture_default_str();
  train->add_option("--relmf-lambda", tf.relmf_lambda, "Rel-MF L2 weight for the upl pipeline")
      ->capture_default_str();
  train->add_option("--run", tf.run, "run index; seed = seed + run")->capture_default_str();

  auto* experiment = app.add_subcommand("experiment", "grid search and repeated runs per method");
  experiment_flags.attach(*experiment, true);

  VerifyFlags vf;
  auto* verify = app.add_subcommand("verify", "run the estimator oracle on a world spec");
  verify->add_option("world", vf.world, "world spec file")->capture_default_str();
  verify->add_option("--samples", vf.samples, "Monte Carlo samples")->capture_default_str();
  verify->add_option("--seed", vf.seed, "Monte Carlo seed")->capture_default_str();
  verify->add_option("--threads", vf.threads, "enumeration threads")->capture_default_str();
  verify->add_option("--out", vf.out, "directory for estimators.tsv and summary.txt");

  std::string report_dir = "results";
  auto* report = app.add_subcommand("report", "re-aggregate runs.tsv of a finished experiment");
  report->add_option("--out", report_dir, "experiment output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) return run_prepare(prepare_flags);
    if (*train) return run_train(train_flags, tf);
    if (*experiment) return run_experiment(experiment_flags);
    if (*verify) return run_verify(vf);
    if (*report) return run_report(report_dir);
  } catch (const upl::ArgumentError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const upl::EnumerationBoundError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const upl::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return 0;
}
