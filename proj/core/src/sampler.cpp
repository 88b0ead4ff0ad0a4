#include "upl/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "upl/errors.hpp"

namespace upl {

ClickIndex::ClickIndex(const ImplicitDataset& dataset)
    : num_items_(dataset.num_items), clicks_by_user_(dataset.clicks_by_user()) {
  for (const auto& items : clicks_by_user_) num_clicks_ += items.size();
}

bool ClickIndex::clicked(UserIndex u, ItemIndex i) const {
  const auto& items = clicks_by_user_[u];
  return std::binary_search(items.begin(), items.end(), i);
}

PairSampler::PairSampler(const ImplicitDataset& dataset, Method method,
                         const PropensityTable& propensities, RelevanceFn relevance)
    : method_(method), index_(dataset), propensities_(&propensities), relevance_(std::move(relevance)) {
  if (!is_pairwise(method)) throw ArgumentError("PairSampler requires a pairwise method");
  if (method == Method::kUpl && !relevance_) {
    throw ArgumentError("UPL sampling requires a relevance estimate");
  }
  if (propensities.num_items() != dataset.num_items) {
    throw ArgumentError("propensity table size does not match the item count");
  }
  if (index_.num_clicks() == 0) throw ArgumentError("dataset has no clicks to sample from");
  for (std::size_t u = 0; u < index_.num_users(); ++u) {
    const auto user = static_cast<UserIndex>(u);
    // Users who clicked everything have no c = 0 partner and are resampled away.
    if (index_.nonclicks_of(user) == 0) continue;
    for (ItemIndex i : index_.clicks_of(user)) positives_.push_back({user, i});
  }
  if (positives_.empty()) throw ArgumentError("no click has an unclicked partner item");
}

PairSample PairSampler::complete(Click positive, Rng& rng) const {
  std::uniform_int_distribution<ItemIndex> item_dist(
      0, static_cast<ItemIndex>(index_.num_items() - 1));
  PairSample s;
  s.u = positive.u;
  s.i = positive.i;
  if (method_ == Method::kUbpr || method_ == Method::kUbprNclip ||
      method_ == Method::kUbprClipped) {
    s.j = item_dist(rng);
    s.c_j = index_.clicked(s.u, s.j);
  } else {
    do {
      s.j = item_dist(rng);
    } while (index_.clicked(s.u, s.j));
    s.c_j = false;
  }
  s.theta_i = propensities_->theta_click[s.i];
  s.theta_j = propensities_->theta_click[s.j];
  if (method_ == Method::kUpl) s.gamma_hat_j = relevance_(s.u, s.j);
  return s;
}

PairSample PairSampler::draw(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, positives_.size() - 1);
  return complete(positives_[pick(rng)], rng);
}

std::vector<PairSample> PairSampler::sample_batch(Rng& rng, std::size_t batch_size) const {
  std::vector<PairSample> batch;
  batch.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) batch.push_back(draw(rng));
  return batch;
}

std::vector<PairSample> PairSampler::epoch(Rng& rng) const {
  std::vector<Click> order = positives_;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<PairSample> out;
  out.reserve(order.size());
  for (const Click& c : order) out.push_back(complete(c, rng));
  return out;
}

PointSampler::PointSampler(const ImplicitDataset& dataset, const PropensityTable& propensities,
                           double negative_ratio)
    : index_(dataset), propensities_(&propensities), negative_ratio_(negative_ratio) {
  if (!(negative_ratio >= 0.0)) throw ArgumentError("negative ratio must be >= 0");
  if (propensities.num_items() != dataset.num_items) {
    throw ArgumentError("propensity table size does not match the item count");
  }
  if (dataset.num_users == 0 || dataset.num_items == 0) throw ArgumentError("empty dataset");
}

PointSample PointSampler::make(UserIndex u, ItemIndex i) const {
  return {u, i, index_.clicked(u, i), propensities_->theta_click[i],
          propensities_->theta_nonclick[i]};
}

PointSample PointSampler::draw(Rng& rng) const {
  std::uniform_int_distribution<UserIndex> user_dist(
      0, static_cast<UserIndex>(index_.num_users() - 1));
  std::uniform_int_distribution<ItemIndex> item_dist(
      0, static_cast<ItemIndex>(index_.num_items() - 1));
  const UserIndex u = user_dist(rng);
  return make(u, item_dist(rng));
}

std::vector<PointSample> PointSampler::sample_batch(Rng& rng, std::size_t batch_size) const {
  std::vector<PointSample> batch;
  batch.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) batch.push_back(draw(rng));
  return batch;
}

std::vector<PointSample> PointSampler::epoch(Rng& rng) const {
  std::vector<PointSample> out;
  const std::size_t users = index_.num_users();
  const std::size_t items = index_.num_items();
  if (negative_ratio_ == 0.0) {
    out.reserve(users * items);
    for (std::size_t u = 0; u < users; ++u) {
      for (std::size_t i = 0; i < items; ++i) {
        out.push_back(make(static_cast<UserIndex>(u), static_cast<ItemIndex>(i)));
      }
    }
  } else {
    for (std::size_t u = 0; u < users; ++u) {
      for (ItemIndex i : index_.clicks_of(static_cast<UserIndex>(u))) {
        out.push_back(make(static_cast<UserIndex>(u), i));
      }
    }
    const std::size_t cells = users * items;
    const std::size_t available = cells - index_.num_clicks();
    const auto wanted = std::min(
        available,
        static_cast<std::size_t>(std::llround(negative_ratio_ * static_cast<double>(out.size()))));
    std::uniform_int_distribution<std::size_t> cell(0, cells - 1);
    for (std::size_t k = 0; k < wanted;) {
      const std::size_t c = cell(rng);
      const auto u = static_cast<UserIndex>(c / items);
      const auto i = static_cast<ItemIndex>(c % items);
      if (index_.clicked(u, i)) continue;
      out.push_back(make(u, i));
      ++k;
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace upl
