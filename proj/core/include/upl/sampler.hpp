#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "upl/dataset.hpp"
#include "upl/losses.hpp"
#include "upl/propensity.hpp"

namespace upl {

using Rng = std::mt19937_64;

// Estimated relevance gamma_hat(u, j) consumed by UPL.
using RelevanceFn = std::function<double(UserIndex, ItemIndex)>;

// Click lookup over the full user x item grid. Unexposed cells are c = 0.
class ClickIndex {
 public:
  explicit ClickIndex(const ImplicitDataset& dataset);

  std::size_t num_users() const noexcept { return clicks_by_user_.size(); }
  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t num_clicks() const noexcept { return num_clicks_; }
  bool clicked(UserIndex u, ItemIndex i) const;
  std::span<const ItemIndex> clicks_of(UserIndex u) const { return clicks_by_user_[u]; }
  std::size_t nonclicks_of(UserIndex u) const { return num_items_ - clicks_by_user_[u].size(); }

 private:
  std::size_t num_items_ = 0;
  std::size_t num_clicks_ = 0;
  std::vector<std::vector<ItemIndex>> clicks_by_user_;
};

struct Click {
  UserIndex u;
  ItemIndex i;
};

// Draws (u, i, j) triples. The positive (u, i) is uniform over clicks whose
// user has at least one unclicked item. For BPR and UPL, j is uniform over the
// user's c = 0 items (exposed or not); for UBPR variants, j is uniform over the
// whole catalogue and c_j is recorded.
class PairSampler {
 public:
  // `relevance` is required for Method::kUpl and ignored otherwise.
  PairSampler(const ImplicitDataset& dataset, Method method, const PropensityTable& propensities,
              RelevanceFn relevance = {});

  Method method() const noexcept { return method_; }
  const ClickIndex& clicks() const noexcept { return index_; }
  std::size_t eligible_positive_count() const noexcept { return positives_.size(); }

  PairSample draw(Rng& rng) const;
  std::vector<PairSample> sample_batch(Rng& rng, std::size_t batch_size) const;
  // One pass over all eligible positives in shuffled order, one j each.
  std::vector<PairSample> epoch(Rng& rng) const;

 private:
  PairSample complete(Click positive, Rng& rng) const;

  Method method_;
  ClickIndex index_;
  const PropensityTable* propensities_;
  RelevanceFn relevance_;
  std::vector<Click> positives_;
};

// Pointwise samples over (u, i) cells. With negative_ratio == 0 an epoch is
// the whole user x item grid; otherwise it is every click plus
// round(negative_ratio * clicks) unclicked cells drawn uniformly.
class PointSampler {
 public:
  PointSampler(const ImplicitDataset& dataset, const PropensityTable& propensities,
               double negative_ratio = 0.0);

  const ClickIndex& clicks() const noexcept { return index_; }

  PointSample draw(Rng& rng) const;
  std::vector<PointSample> sample_batch(Rng& rng, std::size_t batch_size) const;
  std::vector<PointSample> epoch(Rng& rng) const;

 private:
  PointSample make(UserIndex u, ItemIndex i) const;

  ClickIndex index_;
  const PropensityTable* propensities_;
  double negative_ratio_;
};

}  // namespace upl
