#include "upl/factor_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <unordered_set>

#include "upl/errors.hpp"

namespace upl {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'U', 'P', 'L', 'M', 'O', 'D', 'E', 'L'};

template <class T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError("truncated checkpoint", 0);
  return value;
}

double squared_norm(std::span<const double> row) {
  double s = 0.0;
  for (double v : row) s += v * v;
  return s;
}

}  // namespace

FactorModel::FactorModel(std::size_t num_users, std::size_t num_items, std::size_t dim)
    : num_users_(num_users),
      num_items_(num_items),
      dim_(dim),
      user_factors_(num_users * dim, 0.0),
      item_factors_(num_items * dim, 0.0) {
  if (dim == 0) throw DomainError("latent dimension must be >= 1");
}

double FactorModel::score_unchecked(UserIndex u, ItemIndex i) const noexcept {
  const double* p = user_factors_.data() + u * dim_;
  const double* q = item_factors_.data() + i * dim_;
  double s = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) s += p[k] * q[k];
  return s;
}

bool FactorModel::all_finite() const noexcept {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(user_factors_.begin(), user_factors_.end(), finite) &&
         std::all_of(item_factors_.begin(), item_factors_.end(), finite);
}

std::uint64_t FactorModel::checksum() const noexcept {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const std::vector<double>& values) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
    for (std::size_t k = 0; k < values.size() * sizeof(double); ++k) {
      h ^= bytes[k];
      h *= 1099511628211ull;
    }
  };
  mix(user_factors_);
  mix(item_factors_);
  return h;
}

FactorModel init_model(std::size_t num_users, std::size_t num_items, std::size_t dim,
                       std::uint64_t seed, double scale) {
  if (!(scale > 0.0)) throw DomainError("init scale must be > 0");
  FactorModel model(num_users, num_items, dim);
  model.set_seed(seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (double& v : model.user_factors()) v = normal(rng);
  for (double& v : model.item_factors()) v = normal(rng);
  return model;
}

double score(const FactorModel& model, UserIndex u, ItemIndex i) {
  if (u >= model.num_users()) throw DomainError("user index out of range");
  if (i >= model.num_items()) throw DomainError("item index out of range");
  return model.score_unchecked(u, i);
}

double l2_penalty(const FactorModel& model, std::span<const UserIndex> touched_users,
                  std::span<const ItemIndex> touched_items) {
  std::unordered_set<UserIndex> users(touched_users.begin(), touched_users.end());
  std::unordered_set<ItemIndex> items(touched_items.begin(), touched_items.end());
  double total = 0.0;
  for (UserIndex u : users) {
    if (u >= model.num_users()) throw DomainError("user index out of range");
    total += squared_norm(model.user(u));
  }
  for (ItemIndex i : items) {
    if (i >= model.num_items()) throw DomainError("item index out of range");
    total += squared_norm(model.item(i));
  }
  return total;
}

void save_checkpoint(const FactorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint32_t>(model.dim()));
  write_pod(out, static_cast<std::uint64_t>(model.num_users()));
  write_pod(out, static_cast<std::uint64_t>(model.num_items()));
  write_pod(out, model.seed());
  const auto users = model.user_factors();
  const auto items = model.item_factors();
  out.write(reinterpret_cast<const char*>(users.data()),
            static_cast<std::streamsize>(users.size_bytes()));
  out.write(reinterpret_cast<const char*>(items.data()),
            static_cast<std::streamsize>(items.size_bytes()));
  if (!out) throw Error("failed writing " + path.string());
}

FactorModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw ParseError("not a model checkpoint: " + path.string(), 0);
  }
  if (read_pod<std::uint32_t>(in) != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version", 0);
  }
  const auto dim = read_pod<std::uint32_t>(in);
  const auto num_users = read_pod<std::uint64_t>(in);
  const auto num_items = read_pod<std::uint64_t>(in);
  const auto seed = read_pod<std::uint64_t>(in);
  FactorModel model(num_users, num_items, dim);
  model.set_seed(seed);
  auto users = model.user_factors();
  auto items = model.item_factors();
  in.read(reinterpret_cast<char*>(users.data()), static_cast<std::streamsize>(users.size_bytes()));
  in.read(reinterpret_cast<char*>(items.data()), static_cast<std::streamsize>(items.size_bytes()));
  if (!in) throw ParseError("truncated checkpoint", 0);
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes in checkpoint", 0);
  if (!model.all_finite()) throw IntegrityError("checkpoint contains non-finite factors");
  return model;
}

}  // namespace upl
