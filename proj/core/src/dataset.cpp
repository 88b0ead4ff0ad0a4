#include "upl/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include "upl/errors.hpp"

namespace upl {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && !std::isspace(static_cast<unsigned char>(line[end]))) ++end;
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

bool parse_int(std::string_view text, long long& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool all_numeric(const std::vector<std::string>& ids) {
  return std::all_of(ids.begin(), ids.end(), [](const std::string& s) {
    long long v = 0;
    return parse_int(s, v);
  });
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

void check_rating(long long value, int r_max, std::size_t line_number) {
  if (value < 0 || value > r_max) {
    throw DomainError("rating " + std::to_string(value) + " outside [0, " +
                          std::to_string(r_max) + "]",
                      line_number);
  }
}

void sort_and_check_duplicates(std::vector<Rating>& entries,
                               const std::vector<std::size_t>* line_numbers) {
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(entries[a].user, entries[a].item) < std::tie(entries[b].user, entries[b].item);
  });
  std::vector<Rating> sorted;
  sorted.reserve(entries.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Rating& r = entries[order[k]];
    if (!sorted.empty() && sorted.back().user == r.user && sorted.back().item == r.item) {
      std::string msg = "duplicate (user, item) pair (" + std::to_string(r.user) + ", " +
                        std::to_string(r.item) + ")";
      if (line_numbers != nullptr) msg += " at line " + std::to_string((*line_numbers)[order[k]]);
      throw IntegrityError(msg);
    }
    sorted.push_back(r);
  }
  entries = std::move(sorted);
}

struct RawEntry {
  std::string user;
  std::string item;
  int rating;
  std::size_t line;
};

std::vector<RawEntry> read_raw_triplets(const std::filesystem::path& path, int r_max) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  std::vector<RawEntry> raw;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    line = strip_cr(std::move(line));
    if (split_fields(line).empty()) continue;
    RawTriplet t = parse_triplet_line(line, line_number);
    check_rating(t.rating, r_max, line_number);
    if (t.rating == 0) continue;  // unrated
    raw.push_back({std::move(t.user), std::move(t.item), t.rating, line_number});
  }
  return raw;
}

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Rating> entries;
};

DenseMatrix read_dense(const std::filesystem::path& path, int r_max) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  DenseMatrix m;
  std::string line;
  std::size_t line_number = 0;
  bool have_cols = false;
  while (std::getline(in, line)) {
    ++line_number;
    line = strip_cr(std::move(line));
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (!have_cols) {
      m.cols = fields.size();
      have_cols = true;
    } else if (fields.size() != m.cols) {
      throw ParseError("expected " + std::to_string(m.cols) + " columns, found " +
                           std::to_string(fields.size()),
                       line_number);
    }
    const auto user = static_cast<UserIndex>(m.rows);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      long long value = 0;
      if (!parse_int(fields[c], value)) {
        throw ParseError("non-integer rating '" + std::string(fields[c]) + "'", line_number);
      }
      check_rating(value, r_max, line_number);
      if (value != 0) m.entries.push_back({user, static_cast<ItemIndex>(c), static_cast<int>(value)});
    }
    ++m.rows;
  }
  return m;
}

ExplicitRatings build_from_raw(const std::vector<RawEntry>& raw, IdMap users, IdMap items,
                               int r_max) {
  ExplicitRatings out;
  out.r_max = r_max;
  out.num_users = users.size();
  out.num_items = items.size();
  out.entries.reserve(raw.size());
  std::vector<std::size_t> lines;
  lines.reserve(raw.size());
  for (const RawEntry& e : raw) {
    if (!users.contains(e.user)) throw DomainError("unknown user id '" + e.user + "'", e.line);
    if (!items.contains(e.item)) throw DomainError("unknown item id '" + e.item + "'", e.line);
    out.entries.push_back({users.index(e.user), items.index(e.item), e.rating});
    lines.push_back(e.line);
  }
  sort_and_check_duplicates(out.entries, &lines);
  out.user_ids = std::move(users);
  out.item_ids = std::move(items);
  return out;
}

template <class T>
T parse_meta_number(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw ParseError("meta.txt missing key '" + key + "'", 0);
  std::istringstream ss(it->second);
  T value{};
  ss >> value;
  if (ss.fail()) throw ParseError("meta.txt: bad value for '" + key + "'", 0);
  return value;
}

}  // namespace

IdMap IdMap::identity(std::size_t n) {
  IdMap map;
  map.raw_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    map.raw_.push_back(std::to_string(i));
    map.index_.emplace(map.raw_.back(), static_cast<std::uint32_t>(i));
  }
  return map;
}

IdMap IdMap::from_raw(std::vector<std::string> raw_ids) {
  if (all_numeric(raw_ids)) {
    std::sort(raw_ids.begin(), raw_ids.end(), [](const std::string& a, const std::string& b) {
      long long x = 0, y = 0;
      parse_int(a, x);
      parse_int(b, y);
      return x < y || (x == y && a < b);
    });
  } else {
    std::sort(raw_ids.begin(), raw_ids.end());
  }
  raw_ids.erase(std::unique(raw_ids.begin(), raw_ids.end()), raw_ids.end());
  IdMap map;
  map.raw_ = std::move(raw_ids);
  for (std::size_t i = 0; i < map.raw_.size(); ++i) {
    map.index_.emplace(map.raw_[i], static_cast<std::uint32_t>(i));
  }
  return map;
}

std::uint32_t IdMap::index(std::string_view raw_id) const {
  auto it = index_.find(std::string(raw_id));
  if (it == index_.end()) throw DomainError("unknown id '" + std::string(raw_id) + "'");
  return it->second;
}

bool IdMap::contains(std::string_view raw_id) const {
  return index_.count(std::string(raw_id)) != 0;
}

void ExplicitRatings::validate() const {
  if (r_max < 1) throw DomainError("r_max must be >= 1");
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Rating& r = entries[k];
    if (r.user >= num_users || r.item >= num_items) {
      throw DomainError("rating index out of range");
    }
    if (r.value < 1 || r.value > r_max) {
      throw DomainError("rating " + std::to_string(r.value) + " outside [1, " +
                        std::to_string(r_max) + "]");
    }
    if (k > 0) {
      const Rating& p = entries[k - 1];
      if (std::tie(p.user, p.item) >= std::tie(r.user, r.item)) {
        throw IntegrityError("entries not strictly sorted by (user, item) or duplicated");
      }
    }
  }
}

RatingFormat parse_rating_format(std::string_view name) {
  if (name == "triplets" || name == "tsv") return RatingFormat::kTriplets;
  if (name == "dense" || name == "ascii") return RatingFormat::kDense;
  throw ArgumentError("unknown rating format '" + std::string(name) + "'");
}

std::string_view to_string(RatingFormat format) {
  return format == RatingFormat::kTriplets ? "triplets" : "dense";
}

RawTriplet parse_triplet_line(std::string_view line, std::size_t line_number) {
  const auto fields = split_fields(line);
  if (fields.size() != 3) {
    throw ParseError("expected 3 fields 'user item rating', found " + std::to_string(fields.size()),
                     line_number);
  }
  long long rating = 0;
  if (!parse_int(fields[2], rating)) {
    throw ParseError("non-integer rating '" + std::string(fields[2]) + "'", line_number);
  }
  if (rating < std::numeric_limits<int>::min() || rating > std::numeric_limits<int>::max()) {
    throw DomainError("rating out of range", line_number);
  }
  return {std::string(fields[0]), std::string(fields[1]), static_cast<int>(rating)};
}

ExplicitRatings load_triplets(const std::filesystem::path& path, RatingFormat format,
                              const LoadOptions& options) {
  if (!std::filesystem::exists(path)) throw ParseError("no such file: " + path.string(), 0);
  if (format == RatingFormat::kDense) {
    DenseMatrix m = read_dense(path, options.r_max);
    if (options.user_ids != nullptr && options.user_ids->size() != m.rows) {
      throw IntegrityError("dense matrix has " + std::to_string(m.rows) + " rows, expected " +
                           std::to_string(options.user_ids->size()));
    }
    if (options.item_ids != nullptr && options.item_ids->size() != m.cols) {
      throw IntegrityError("dense matrix has " + std::to_string(m.cols) + " columns, expected " +
                           std::to_string(options.item_ids->size()));
    }
    ExplicitRatings out;
    out.r_max = options.r_max;
    out.num_users = m.rows;
    out.num_items = m.cols;
    out.entries = std::move(m.entries);
    out.user_ids = IdMap::identity(m.rows);
    out.item_ids = IdMap::identity(m.cols);
    return out;
  }

  std::vector<RawEntry> raw = read_raw_triplets(path, options.r_max);
  IdMap users;
  IdMap items;
  if (options.user_ids != nullptr) {
    users = *options.user_ids;
  } else {
    std::vector<std::string> ids;
    for (const auto& e : raw) ids.push_back(e.user);
    users = IdMap::from_raw(std::move(ids));
  }
  if (options.item_ids != nullptr) {
    items = *options.item_ids;
  } else {
    std::vector<std::string> ids;
    for (const auto& e : raw) ids.push_back(e.item);
    items = IdMap::from_raw(std::move(ids));
  }
  return build_from_raw(raw, std::move(users), std::move(items), options.r_max);
}

ExplicitSplitPair load_split_pair(const std::filesystem::path& train_path,
                                  const std::filesystem::path& test_path, RatingFormat format,
                                  int r_max) {
  if (format == RatingFormat::kDense) {
    ExplicitSplitPair pair;
    pair.train = load_triplets(train_path, format, {r_max, nullptr, nullptr});
    LoadOptions opts{r_max, &pair.train.user_ids, &pair.train.item_ids};
    pair.test = load_triplets(test_path, format, opts);
    return pair;
  }
  for (const auto& p : {train_path, test_path}) {
    if (!std::filesystem::exists(p)) throw ParseError("no such file: " + p.string(), 0);
  }
  const auto train_raw = read_raw_triplets(train_path, r_max);
  const auto test_raw = read_raw_triplets(test_path, r_max);
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  for (const auto* raw : {&train_raw, &test_raw}) {
    for (const auto& e : *raw) {
      user_ids.push_back(e.user);
      item_ids.push_back(e.item);
    }
  }
  IdMap users = IdMap::from_raw(std::move(user_ids));
  IdMap items = IdMap::from_raw(std::move(item_ids));
  ExplicitSplitPair pair;
  pair.train = build_from_raw(train_raw, users, items, r_max);
  pair.test = build_from_raw(test_raw, std::move(users), std::move(items), r_max);
  return pair;
}

double rating_to_relevance(int rating, double epsilon, int r_max) {
  if (r_max < 1 || r_max > 62) throw DomainError("r_max outside [1, 62]");
  if (rating < 1 || rating > r_max) {
    throw DomainError("rating " + std::to_string(rating) + " outside [1, " + std::to_string(r_max) +
                      "]");
  }
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("epsilon outside [0, 1)");
  const double numerator = std::ldexp(1.0, rating) - 1.0;
  const double denominator = std::ldexp(1.0, r_max) - 1.0;
  return epsilon + (1.0 - epsilon) * numerator / denominator;
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain:
      return "train";
    case SplitTag::kValidation:
      return "validation";
    case SplitTag::kTest:
      return "test";
  }
  return "train";
}

SplitTag parse_split_tag(std::string_view name) {
  if (name == "train") return SplitTag::kTrain;
  if (name == "validation") return SplitTag::kValidation;
  if (name == "test") return SplitTag::kTest;
  throw ParseError("unknown split tag '" + std::string(name) + "'", 0);
}

std::size_t ImplicitDataset::num_clicks() const {
  return static_cast<std::size_t>(
      std::count_if(exposed.begin(), exposed.end(), [](const Interaction& x) { return x.clicked(); }));
}

std::vector<std::size_t> ImplicitDataset::item_click_counts() const {
  std::vector<std::size_t> counts(num_items, 0);
  for (const auto& x : exposed) {
    if (x.clicked()) ++counts[x.item];
  }
  return counts;
}

std::vector<std::size_t> ImplicitDataset::user_click_counts() const {
  std::vector<std::size_t> counts(num_users, 0);
  for (const auto& x : exposed) {
    if (x.clicked()) ++counts[x.user];
  }
  return counts;
}

std::vector<std::vector<ItemIndex>> ImplicitDataset::clicks_by_user() const {
  std::vector<std::vector<ItemIndex>> out(num_users);
  for (const auto& x : exposed) {
    if (x.clicked()) out[x.user].push_back(x.item);
  }
  return out;
}

std::vector<std::vector<std::size_t>> ImplicitDataset::exposed_by_user() const {
  std::vector<std::vector<std::size_t>> out(num_users);
  for (std::size_t k = 0; k < exposed.size(); ++k) out[exposed[k].user].push_back(k);
  return out;
}

void ImplicitDataset::validate() const {
  for (std::size_t k = 0; k < exposed.size(); ++k) {
    const Interaction& x = exposed[k];
    if (x.user >= num_users || x.item >= num_items) throw DomainError("interaction index out of range");
    if (!(x.relevance_prob >= 0.0 && x.relevance_prob <= 1.0)) {
      throw DomainError("relevance probability outside [0, 1]");
    }
    if (k > 0 && std::tie(exposed[k - 1].user, exposed[k - 1].item) >= std::tie(x.user, x.item)) {
      throw IntegrityError("exposed cells not strictly sorted by (user, item)");
    }
  }
}

ImplicitDataset generate_semi_synthetic(const ExplicitRatings& ratings, double epsilon,
                                        std::uint64_t seed, SplitTag split) {
  ratings.validate();
  ImplicitDataset out;
  out.num_users = ratings.num_users;
  out.num_items = ratings.num_items;
  out.r_max = ratings.r_max;
  out.epsilon = epsilon;
  out.seed = seed;
  out.split = split;
  out.exposed.reserve(ratings.entries.size());
  std::mt19937_64 rng(seed);
  for (const Rating& r : ratings.entries) {
    const double gamma = rating_to_relevance(r.value, epsilon, ratings.r_max);
    std::bernoulli_distribution draw(gamma);
    out.exposed.push_back({r.user, r.item, r.value, gamma, draw(rng)});
  }
  return out;
}

TrainValidationSplit split_validation(const ImplicitDataset& dataset, double fraction,
                                      std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw DomainError("validation fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.exposed.size();
  const auto n_validation = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> in_validation(n, false);
  for (std::size_t k = 0; k < n_validation; ++k) in_validation[order[k]] = true;

  TrainValidationSplit out;
  out.train = dataset;
  out.train.exposed.clear();
  out.train.split = SplitTag::kTrain;
  out.validation = out.train;
  out.validation.split = SplitTag::kValidation;
  for (std::size_t k = 0; k < n; ++k) {
    (in_validation[k] ? out.validation : out.train).exposed.push_back(dataset.exposed[k]);
  }
  return out;
}

void save_dataset(const ImplicitDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream meta(dir / "meta.txt");
    char eps[64];
    std::snprintf(eps, sizeof eps, "%.17g", dataset.epsilon);
    meta << "format_version=" << kDatasetFormatVersion << '\n'
         << "split=" << to_string(dataset.split) << '\n'
         << "num_users=" << dataset.num_users << '\n'
         << "num_items=" << dataset.num_items << '\n'
         << "r_max=" << dataset.r_max << '\n'
         << "epsilon=" << eps << '\n'
         << "seed=" << dataset.seed << '\n'
         << "num_exposed=" << dataset.exposed.size() << '\n'
         << "num_clicks=" << dataset.num_clicks() << '\n';
    if (!meta) throw Error("failed writing " + (dir / "meta.txt").string());
  }
  std::ofstream pairs(dir / "pairs.tsv");
  char gamma[64];
  for (const Interaction& x : dataset.exposed) {
    std::snprintf(gamma, sizeof gamma, "%.17g", x.relevance_prob);
    pairs << x.user << '\t' << x.item << '\t' << x.rating << '\t' << gamma << '\t'
          << (x.relevant ? 1 : 0) << '\n';
  }
  if (!pairs) throw Error("failed writing " + (dir / "pairs.tsv").string());
}

ImplicitDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "meta.txt");
  if (!meta_in) throw ParseError("cannot open " + (dir / "meta.txt").string(), 0);
  std::map<std::string, std::string> meta;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(meta_in, line)) {
    ++line_number;
    line = strip_cr(std::move(line));
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("meta.txt: expected key=value", line_number);
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (parse_meta_number<int>(meta, "format_version") != kDatasetFormatVersion) {
    throw ParseError("unsupported dataset format_version", 0);
  }
  ImplicitDataset out;
  out.split = parse_split_tag(meta.at("split"));
  out.num_users = parse_meta_number<std::size_t>(meta, "num_users");
  out.num_items = parse_meta_number<std::size_t>(meta, "num_items");
  out.r_max = parse_meta_number<int>(meta, "r_max");
  out.epsilon = parse_meta_number<double>(meta, "epsilon");
  out.seed = parse_meta_number<std::uint64_t>(meta, "seed");
  const auto expected = parse_meta_number<std::size_t>(meta, "num_exposed");

  std::ifstream in(dir / "pairs.tsv");
  if (!in) throw ParseError("cannot open " + (dir / "pairs.tsv").string(), 0);
  line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::istringstream ss(line);
    Interaction x;
    int relevant = 0;
    if (!(ss >> x.user >> x.item >> x.rating >> x.relevance_prob >> relevant)) {
      throw ParseError("pairs.tsv: malformed record", line_number);
    }
    x.relevant = relevant != 0;
    out.exposed.push_back(x);
  }
  if (out.exposed.size() != expected) {
    throw IntegrityError("pairs.tsv has " + std::to_string(out.exposed.size()) +
                         " records, meta.txt declares " + std::to_string(expected));
  }
  out.validate();
  return out;
}

void save_id_map(const IdMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  for (std::size_t i = 0; i < map.size(); ++i) out << i << '\t' << map.raw(i) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

IdMap load_id_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  std::vector<std::string> raw;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto fields = split_fields(strip_cr(line));
    if (fields.empty()) continue;
    long long index = 0;
    if (fields.size() != 2 || !parse_int(fields[0], index) ||
        index != static_cast<long long>(raw.size())) {
      throw ParseError("id map: expected 'index raw_id' with consecutive indices", line_number);
    }
    raw.emplace_back(fields[1]);
  }
  IdMap map = IdMap::from_raw(raw);
  if (map.raw_ids() != raw) throw IntegrityError("id map is not in canonical order");
  return map;
}

}  // namespace upl
