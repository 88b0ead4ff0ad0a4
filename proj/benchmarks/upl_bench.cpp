#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "upl/dataset.hpp"
#include "upl/evaluation.hpp"
#include "upl/factor_model.hpp"
#include "upl/losses.hpp"
#include "upl/oracle.hpp"
#include "upl/propensity.hpp"
#include "upl/sampler.hpp"
#include "upl/trainer.hpp"

namespace {

using namespace upl;

// Coat-sized world: 290 users x 300 items, 24 ratings per user.
ImplicitDataset coat_like(std::size_t users = 290, std::size_t items = 300) {
  Rng rng(3);
  std::uniform_int_distribution<int> rating(1, 5);
  ExplicitRatings r;
  r.num_users = users;
  r.num_items = items;
  for (std::size_t u = 0; u < users; ++u) {
    for (std::size_t i = u % 12; i < items; i += 12) {
      r.entries.push_back({static_cast<UserIndex>(u), static_cast<ItemIndex>(i), rating(rng)});
    }
  }
  return generate_semi_synthetic(r, 0.1, 1);
}

void BM_PairObjective(benchmark::State& state) {
  const LossSpec specs[] = {LossSpec::bpr(), LossSpec::ubpr(), LossSpec::ubpr_clipped(-0.1),
                            LossSpec::upl()};
  const LossSpec& spec = specs[state.range(0)];
  PairSample s{0, 0, 1, false, 0.3, 0.2, 0.4};
  double si = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pair_objective(spec, s, si, -0.2));
    si += 1e-9;
  }
}
BENCHMARK(BM_PairObjective)->DenseRange(0, 3);

void BM_PairSamplerBatch(benchmark::State& state) {
  const ImplicitDataset data = coat_like();
  const auto counts = data.item_click_counts();
  const PropensityTable p = estimate_propensities(counts);
  const PairSampler sampler(data, Method::kUpl, p, [](UserIndex, ItemIndex) { return 0.3; });
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample_batch(rng, 256));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_PairSamplerBatch);

void BM_PairwiseBatchStep(benchmark::State& state) {
  const ImplicitDataset data = coat_like();
  const PropensityTable p = estimate_propensities(data.item_click_counts());
  const PairSampler sampler(data, Method::kUpl, p, [](UserIndex, ItemIndex) { return 0.3; });
  FactorModel model = init_model(data.num_users, data.num_items, state.range(0), 1);
  AdamState adam(model, AdamConfig{});
  Rng rng(5);
  for (auto _ : state) {
    const auto batch = sampler.sample_batch(rng, 256);
    apply_gradient(model, adam, pairwise_batch_objective(model, batch, LossSpec::upl(), 1e-5).gradient);
  }
}
BENCHMARK(BM_PairwiseBatchStep)->Arg(100)->Arg(300);

void BM_ExactExpectation(benchmark::State& state) {
  Rng rng(11);
  const auto cells = static_cast<std::size_t>(state.range(0));
  const SyntheticWorld world = random_world(1, cells, rng, 0.05, 0.95, 0.05, 0.95);
  CellTable scores(1, cells);
  std::normal_distribution<double> normal;
  for (double& v : scores.values) v = normal(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(exact_expectation(world, scores, OracleEstimator::kUpl));
  }
}
BENCHMARK(BM_ExactExpectation)->DenseRange(4, 10, 2)->Unit(benchmark::kMillisecond);

void BM_Evaluate(benchmark::State& state) {
  const ImplicitDataset data = coat_like();
  const CohortCounts counts = CohortCounts::from(data);
  const FactorModel model = init_model(data.num_users, data.num_items, 100, 2);
  EvaluationOptions options;
  options.cohorts = {Cohort::kAll, Cohort::kColdStartUsers, Cohort::kRareItems};
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(model, data, counts, options));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
