#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace upl {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;

struct Rating {
  UserIndex user = 0;
  ItemIndex item = 0;
  int value = 0;

  friend bool operator==(const Rating&, const Rating&) = default;
};

// Bidirectional map between raw dataset identifiers and dense 0-based indices.
// Raw identifiers are kept as text so both numeric and string ids round-trip.
class IdMap {
 public:
  IdMap() = default;

  // Dense identity mapping "0".."n-1".
  static IdMap identity(std::size_t n);

  // Indices are assigned in ascending raw-id order (numeric when every id
  // parses as an integer, lexicographic otherwise).
  static IdMap from_raw(std::vector<std::string> raw_ids);

  std::size_t size() const noexcept { return raw_.size(); }
  const std::string& raw(std::size_t index) const { return raw_.at(index); }
  // Throws DomainError when the id is unknown.
  std::uint32_t index(std::string_view raw_id) const;
  bool contains(std::string_view raw_id) const;

  const std::vector<std::string>& raw_ids() const noexcept { return raw_; }

  friend bool operator==(const IdMap&, const IdMap&) = default;

 private:
  std::vector<std::string> raw_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct ExplicitRatings {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  int r_max = 5;
  std::vector<Rating> entries;  // sorted by (user, item)
  IdMap user_ids;
  IdMap item_ids;

  // Throws DomainError / IntegrityError when an invariant is broken.
  void validate() const;
};

enum class RatingFormat { kTriplets, kDense };

RatingFormat parse_rating_format(std::string_view name);
std::string_view to_string(RatingFormat format);

struct RawTriplet {
  std::string user;
  std::string item;
  int rating = 0;
};

// Parses one "user<TAB>item<TAB>rating" line (any whitespace accepted).
RawTriplet parse_triplet_line(std::string_view line, std::size_t line_number);

struct LoadOptions {
  int r_max = 5;
  // When set, raw ids are resolved through these maps instead of building new
  // ones. Used to load a test file against the training file's index space.
  const IdMap* user_ids = nullptr;
  const IdMap* item_ids = nullptr;
};

ExplicitRatings load_triplets(const std::filesystem::path& path, RatingFormat format,
                              const LoadOptions& options = {});

struct ExplicitSplitPair {
  ExplicitRatings train;
  ExplicitRatings test;
};

// Loads a train/test pair into one shared index space built from the union of
// both files' identifiers.
ExplicitSplitPair load_split_pair(const std::filesystem::path& train_path,
                                  const std::filesystem::path& test_path, RatingFormat format,
                                  int r_max = 5);

// gamma = eps + (1 - eps) * (2^r - 1) / (2^r_max - 1)
double rating_to_relevance(int rating, double epsilon, int r_max);

enum class SplitTag { kTrain, kValidation, kTest };

std::string_view to_string(SplitTag tag);
SplitTag parse_split_tag(std::string_view name);

// One exposed (rated) cell of the semi-synthetic world.
struct Interaction {
  UserIndex user = 0;
  ItemIndex item = 0;
  int rating = 0;
  double relevance_prob = 0.0;  // gamma
  bool relevant = false;        // Bernoulli(gamma) draw; click = exposed && relevant

  bool clicked() const noexcept { return relevant; }

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

// Semi-synthetic implicit feedback. Only exposed cells are stored; every other
// (user, item) cell is unexposed and therefore unclicked.
struct ImplicitDataset {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  int r_max = 5;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  SplitTag split = SplitTag::kTrain;
  std::vector<Interaction> exposed;  // sorted by (user, item)

  std::size_t num_clicks() const;
  std::vector<std::size_t> item_click_counts() const;
  std::vector<std::size_t> user_click_counts() const;
  // Clicked items per user, ascending.
  std::vector<std::vector<ItemIndex>> clicks_by_user() const;
  // Exposed interactions per user, as indices into `exposed`.
  std::vector<std::vector<std::size_t>> exposed_by_user() const;

  void validate() const;
};

ImplicitDataset generate_semi_synthetic(const ExplicitRatings& ratings, double epsilon,
                                        std::uint64_t seed,
                                        SplitTag split = SplitTag::kTrain);

struct TrainValidationSplit {
  ImplicitDataset train;
  ImplicitDataset validation;
};

// Validation receives floor(fraction * |exposed|) cells chosen uniformly by seed.
TrainValidationSplit split_validation(const ImplicitDataset& dataset, double fraction,
                                      std::uint64_t seed);

// On-disk layout, format version 1:
//   <dir>/meta.txt   key=value lines: format_version, split, num_users,
//                    num_items, r_max, epsilon, seed, num_exposed, num_clicks
//   <dir>/pairs.tsv  "user item rating gamma relevant" per exposed cell,
//                    sorted by (user, item); gamma printed with %.17g
inline constexpr int kDatasetFormatVersion = 1;

void save_dataset(const ImplicitDataset& dataset, const std::filesystem::path& dir);
ImplicitDataset load_dataset(const std::filesystem::path& dir);

// "index<TAB>raw_id" per line.
void save_id_map(const IdMap& map, const std::filesystem::path& path);
IdMap load_id_map(const std::filesystem::path& path);

}  // namespace upl
