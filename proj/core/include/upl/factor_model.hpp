#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "upl/dataset.hpp"

namespace upl {

inline constexpr double kDefaultInitScale = 0.01;

// Inner-product ranker f(u, i) = <P_u, Q_i> without bias terms.
class FactorModel {
 public:
  FactorModel() = default;
  // Zero-initialized. Throws DomainError when dim == 0.
  FactorModel(std::size_t num_users, std::size_t num_items, std::size_t dim);

  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t seed() const noexcept { return seed_; }
  void set_seed(std::uint64_t seed) noexcept { seed_ = seed; }

  std::span<double> user(UserIndex u) { return {user_factors_.data() + u * dim_, dim_}; }
  std::span<const double> user(UserIndex u) const {
    return {user_factors_.data() + u * dim_, dim_};
  }
  std::span<double> item(ItemIndex i) { return {item_factors_.data() + i * dim_, dim_}; }
  std::span<const double> item(ItemIndex i) const {
    return {item_factors_.data() + i * dim_, dim_};
  }

  std::span<double> user_factors() noexcept { return user_factors_; }
  std::span<const double> user_factors() const noexcept { return user_factors_; }
  std::span<double> item_factors() noexcept { return item_factors_; }
  std::span<const double> item_factors() const noexcept { return item_factors_; }

  // Unchecked dot product for hot loops.
  double score_unchecked(UserIndex u, ItemIndex i) const noexcept;

  bool all_finite() const noexcept;
  // FNV-1a over the raw bytes of both matrices.
  std::uint64_t checksum() const noexcept;

  friend bool operator==(const FactorModel&, const FactorModel&) = default;

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> user_factors_;
  std::vector<double> item_factors_;
};

// Entries i.i.d. N(0, scale^2), deterministic per seed.
FactorModel init_model(std::size_t num_users, std::size_t num_items, std::size_t dim,
                       std::uint64_t seed, double scale = kDefaultInitScale);

// Throws DomainError on out-of-range indices.
double score(const FactorModel& model, UserIndex u, ItemIndex i);

// Sum of squared entries over the touched user and item rows. Duplicate
// indices are counted once.
double l2_penalty(const FactorModel& model, std::span<const UserIndex> touched_users,
                  std::span<const ItemIndex> touched_items);

// Checkpoint layout, little-endian:
//   bytes 0..7   magic "UPLMODEL"
//   u32          format version (1)
//   u32          dim
//   u64          num_users
//   u64          num_items
//   u64          seed
//   f64[num_users * dim]  user factors, row-major
//   f64[num_items * dim]  item factors, row-major
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const FactorModel& model, const std::filesystem::path& path);
FactorModel load_checkpoint(const std::filesystem::path& path);

}  // namespace upl
