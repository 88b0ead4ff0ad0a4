#include "upl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <thread>

#include "upl/errors.hpp"
#include "upl/report.hpp"

namespace upl {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string describe(const Hyperparams& hp) {
  std::string s = "dim=" + std::to_string(hp.dim) + " lambda=" + fmt(hp.lambda);
  if (hp.clip) s += " clip=" + fmt(*hp.clip);
  return s;
}

double best_validation(const TrainRun& run) {
  double best = 0.0;
  for (double v : run.validation_curve) best = std::max(best, v);
  return best;
}

struct TaskResult {
  std::optional<TrainRun> run;
  std::optional<std::string> error;
};

}  // namespace

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& task) {
  const unsigned workers = static_cast<unsigned>(std::max<std::size_t>(
      1, std::min<std::size_t>(threads, count)));
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) task(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) task(k);
    });
  }
  for (auto& t : pool) t.join();
}

PreparedData prepare_data(const ExperimentConfig& config) {
  const ExplicitSplitPair raw =
      load_split_pair(config.train_path(), config.test_path(), config.format, config.r_max);
  PreparedData data;
  const ImplicitDataset full_train =
      generate_semi_synthetic(raw.train, config.epsilon_train, config.seed, SplitTag::kTrain);
  data.test = generate_semi_synthetic(raw.test, config.epsilon_test, config.seed + 1, SplitTag::kTest);
  auto split = split_validation(full_train, config.validation_fraction, config.seed + 2);
  data.train = std::move(split.train);
  data.validation = std::move(split.validation);
  data.user_ids = raw.train.user_ids;
  data.item_ids = raw.train.item_ids;
  const auto counts = data.train.item_click_counts();
  data.propensities = estimate_propensities(counts, config.propensity_power, config.propensity_floor);
  data.counts = CohortCounts::from(data.train);
  return data;
}

void save_prepared(const PreparedData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_dataset(data.train, dir / "train");
  save_dataset(data.validation, dir / "validation");
  save_dataset(data.test, dir / "test");
  save_id_map(data.user_ids, dir / "user_ids.tsv");
  save_id_map(data.item_ids, dir / "item_ids.tsv");
  save_propensities(data.propensities.theta_click, dir / "propensity_click.tsv");
  save_propensities(data.propensities.theta_nonclick, dir / "propensity_nonclick.tsv");
}

PreparedData load_prepared(const std::filesystem::path& dir, double propensity_power,
                           double propensity_floor) {
  PreparedData data;
  data.train = load_dataset(dir / "train");
  data.validation = load_dataset(dir / "validation");
  data.test = load_dataset(dir / "test");
  for (const auto* split : {&data.validation, &data.test}) {
    if (split->num_users != data.train.num_users || split->num_items != data.train.num_items) {
      throw IntegrityError("prepared splits disagree on dimensions");
    }
  }
  data.user_ids = load_id_map(dir / "user_ids.tsv");
  data.item_ids = load_id_map(dir / "item_ids.tsv");
  data.propensities = estimate_propensities(data.train.item_click_counts(), propensity_power,
                                            propensity_floor);
  data.counts = CohortCounts::from(data.train);
  return data;
}

TrainConfig make_train_config(const ExperimentConfig& config, const Hyperparams& hp,
                              std::uint64_t seed) {
  TrainConfig t;
  t.dim = hp.dim;
  t.lambda = hp.lambda;
  t.learning_rate = config.learning_rate;
  t.batch_size = config.batch_size;
  t.max_epochs = config.max_epochs;
  t.patience = config.patience;
  t.seed = seed;
  t.init_scale = config.init_scale;
  t.validation_k = 5;
  t.pointwise_negative_ratio = config.pointwise_negative_ratio;
  return t;
}

LossSpec make_loss_spec(const ExperimentConfig& config, Method method, const Hyperparams& hp) {
  LossSpec spec{method, std::nullopt, std::nullopt};
  if (method == Method::kUbprClipped) spec.clip_threshold = hp.clip.value_or(0.0);
  if (method == Method::kWmf) spec.wmf_weight = config.wmf_weight;
  return spec;
}

std::vector<Hyperparams> hyperparameter_grid(const ExperimentConfig& config, Method method) {
  std::vector<Hyperparams> grid;
  const bool clipped = method == Method::kUbprClipped;
  const std::vector<double> clips =
      clipped ? config.grid_clip : std::vector<double>{0.0};
  for (std::size_t d : config.grid_dim) {
    for (double l : config.grid_lambda) {
      for (double c : clips) {
        Hyperparams hp{d, l, std::nullopt};
        if (clipped) hp.clip = c;
        grid.push_back(hp);
        if (!config.grid_search) return grid;
      }
    }
  }
  return grid;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
  config.validate();
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };

  ExperimentResult result;
  result.config_hash = config.hash();
  result.dir = config.out;
  std::filesystem::create_directories(config.out);
  const std::string stamp = "# config_hash=" + result.config_hash + " seed=" + std::to_string(config.seed);
  {
    std::ofstream out(config.out / "config.txt");
    out << stamp << '\n' << config.canonical_text();
  }

  const PreparedData data = prepare_data(config);
  say("prepared data: " + std::to_string(data.train.num_users) + " users, " +
      std::to_string(data.train.num_items) + " items, " + std::to_string(data.train.num_clicks()) +
      " training clicks");

  TrainInputs base_inputs;
  base_inputs.train = &data.train;
  base_inputs.validation = &data.validation;
  base_inputs.propensities = &data.propensities;

  const bool wants_upl =
      std::find(config.methods.begin(), config.methods.end(), Method::kUpl) != config.methods.end();
  std::vector<Method> direct;  // methods tuned without a pipeline
  for (Method m : config.methods) {
    if (m != Method::kUpl && std::find(direct.begin(), direct.end(), m) == direct.end()) {
      direct.push_back(m);
    }
  }
  if (wants_upl && std::find(direct.begin(), direct.end(), Method::kRelmf) == direct.end()) {
    direct.push_back(Method::kRelmf);
  }

  // Phase 1: grid search for every non-pipeline method.
  struct GridTask {
    Method method;
    Hyperparams hp;
  };
  std::vector<GridTask> grid_tasks;
  for (Method m : direct) {
    for (const auto& hp : hyperparameter_grid(config, m)) grid_tasks.push_back({m, hp});
  }
  std::vector<TaskResult> grid_results(grid_tasks.size());
  const bool tune = config.grid_search;
  parallel_for(grid_tasks.size(), config.threads, [&](std::size_t k) {
    if (!tune) return;
    const auto& task = grid_tasks[k];
    try {
      grid_results[k].run = train(base_inputs, make_train_config(config, task.hp, config.seed),
                                  make_loss_spec(config, task.method, task.hp));
    } catch (const Error& e) {
      grid_results[k].error = e.what();
    }
  });

  std::map<Method, Hyperparams> selected;
  std::map<Method, std::string> failures;
  auto select = [&](Method m, const std::vector<GridTask>& tasks,
                    const std::vector<TaskResult>& results) {
    std::optional<std::size_t> best;
    double best_value = -1.0;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      if (tasks[k].method != m) continue;
      if (results[k].error) {
        failures.emplace(m, *results[k].error);
        return;
      }
      const double v = tune ? best_validation(*results[k].run) : 0.0;
      result.selection.push_back({m, tasks[k].hp, v, false});
      if (v > best_value) {
        best_value = v;
        best = result.selection.size() - 1;
      }
      if (tune) say(std::string(to_string(m)) + " " + describe(tasks[k].hp) + ": validation DCG@5 " + fmt(v));
    }
    if (best) {
      result.selection[*best].selected = true;
      selected[m] = result.selection[*best].hp;
    }
  };
  for (Method m : direct) select(m, grid_tasks, grid_results);

  // Phase 2: UPL grid search on top of the selected Rel-MF configuration.
  if (wants_upl) {
    if (!selected.count(Method::kRelmf)) {
      failures.emplace(Method::kUpl, "Rel-MF stage failed: " + failures[Method::kRelmf]);
    } else {
      std::vector<GridTask> upl_tasks;
      for (const auto& hp : hyperparameter_grid(config, Method::kUpl)) {
        upl_tasks.push_back({Method::kUpl, hp});
      }
      std::vector<TaskResult> upl_results(upl_tasks.size());
      if (tune) {
        try {
          const TrainRun relmf = train(base_inputs,
                                       make_train_config(config, selected[Method::kRelmf], config.seed),
                                       LossSpec::relmf());
          const RelevanceEstimator estimator(relmf.final_model);
          TrainInputs inputs = base_inputs;
          inputs.gamma_hat = estimator.as_function();
          parallel_for(upl_tasks.size(), config.threads, [&](std::size_t k) {
            try {
              upl_results[k].run =
                  train(inputs, make_train_config(config, upl_tasks[k].hp, config.seed), LossSpec::upl());
            } catch (const Error& e) {
              upl_results[k].error = e.what();
            }
          });
        } catch (const Error& e) {
          for (auto& r : upl_results) r.error = std::string("Rel-MF stage failed: ") + e.what();
        }
      }
      select(Method::kUpl, upl_tasks, upl_results);
    }
  }

  // Phase 3: final runs.
  struct RunTask {
    Method method;
    int run;
  };
  std::vector<RunTask> run_tasks;
  for (Method m : config.methods) {
    if (!selected.count(m)) continue;
    for (std::size_t r = 0; r < config.runs; ++r) run_tasks.push_back({m, static_cast<int>(r)});
  }
  EvaluationOptions eval;
  eval.ks = config.ks;
  eval.cohort_spec = {config.rare_item_threshold, config.cold_start_threshold};
  eval.graded_relevance = config.graded_relevance;
  eval.cohorts = config.cohorts
                     ? std::vector<Cohort>{Cohort::kAll, Cohort::kColdStartUsers, Cohort::kRareItems}
                     : std::vector<Cohort>{Cohort::kAll};

  struct RunOutput {
    std::vector<MetricReport> reports;
    RunRecord record;
    std::optional<std::string> error;
  };
  std::vector<RunOutput> run_outputs(run_tasks.size());
  parallel_for(run_tasks.size(), config.threads, [&](std::size_t k) {
    const auto& task = run_tasks[k];
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(task.run);
    RunOutput& out = run_outputs[k];
    try {
      TrainRun run;
      if (task.method == Method::kUpl) {
        run = run_upl_pipeline(base_inputs,
                               make_train_config(config, selected.at(Method::kRelmf), seed),
                               make_train_config(config, selected.at(Method::kUpl), seed))
                  .ranker;
      } else {
        const Hyperparams& hp = selected.at(task.method);
        run = train(base_inputs, make_train_config(config, hp, seed),
                    make_loss_spec(config, task.method, hp));
      }
      out.reports = evaluate(run.final_model, data.test, data.counts, eval);
      for (auto& r : out.reports) {
        r.method = std::string(to_string(task.method));
        r.run = task.run;
      }
      out.record = {task.method, task.run, seed, run.epochs_trained, run.best_epoch};
    } catch (const Error& e) {
      out.error = e.what();
    }
  });

  for (Method m : config.methods) {
    MethodOutcome outcome;
    outcome.method = m;
    if (auto it = failures.find(m); it != failures.end()) outcome.error = it->second;
    if (auto it = selected.find(m); it != selected.end()) outcome.selected = it->second;
    for (std::size_t k = 0; k < run_tasks.size(); ++k) {
      if (run_tasks[k].method != m) continue;
      if (run_outputs[k].error) {
        if (!outcome.error) outcome.error = *run_outputs[k].error;
        continue;
      }
      outcome.runs.push_back(run_outputs[k].record);
      for (auto& r : run_outputs[k].reports) outcome.reports.push_back(std::move(r));
    }
    if (outcome.error) {
      outcome.reports.clear();
      say(std::string(to_string(m)) + " failed: " + *outcome.error);
    }
    result.outcomes.push_back(std::move(outcome));
  }

  {
    std::ofstream out(config.out / "selection.tsv");
    out << stamp << '\n' << "method\tdim\tlambda\tclip\tvalidation_dcg5\tselected\n";
    char buf[64];
    for (const auto& s : result.selection) {
      std::snprintf(buf, sizeof buf, "%.10f", s.validation_dcg);
      out << to_string(s.method) << '\t' << s.hp.dim << '\t' << fmt(s.hp.lambda) << '\t'
          << (s.hp.clip ? fmt(*s.hp.clip) : "NA") << '\t' << buf << '\t' << (s.selected ? 1 : 0)
          << '\n';
    }
  }
  {
    std::ofstream out(config.out / "runs.tsv");
    out << stamp << '\n';
    bool header = true;
    for (const auto& o : result.outcomes) {
      if (o.error) continue;
      write_reports_tsv(out, o.reports, header);
      header = false;
    }
    if (header) out << "method\trun\tcohort\tmetric\tK\tvalue\n";
  }
  {
    std::ofstream out(config.out / "runs_meta.tsv");
    out << stamp << '\n' << "method\trun\tseed\tepochs\tbest_epoch\n";
    for (const auto& o : result.outcomes) {
      if (o.error) continue;
      for (const auto& r : o.runs) {
        out << to_string(r.method) << '\t' << r.run << '\t' << r.seed << '\t' << r.epochs << '\t'
            << r.best_epoch << '\n';
      }
    }
  }
  {
    std::ofstream out(config.out / "errors.tsv");
    out << stamp << '\n' << "method\terror\n";
    for (const auto& o : result.outcomes) {
      if (o.error) out << to_string(o.method) << '\t' << *o.error << '\n';
    }
  }
  write_aggregates(config.out, stamp);
  return result;
}

}  // namespace upl
