#include "upl/experiment_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "upl/errors.hpp"

namespace upl {
namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != value.size()) throw ArgumentError("config '" + key + "': not a number: '" + value + "'");
  return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ArgumentError("config '" + key + "': not a non-negative integer: '" + value + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  throw ArgumentError("config '" + key + "': not a boolean: '" + value + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) out += ',';
    out += f(xs[k]);
  }
  return out;
}

}  // namespace

const std::map<std::string, std::string>& config_keys() {
  static const std::map<std::string, std::string> keys = {
      {"dataset", "directory holding the raw train and test rating files"},
      {"format", "raw file format: dense (Coat ascii matrices) or triplets (user item rating)"},
      {"train_file", "training file name inside `dataset` (default train.ascii / train.txt)"},
      {"test_file", "test file name inside `dataset` (default test.ascii / test.txt)"},
      {"r_max", "maximum star rating"},
      {"methods", "comma list of wmf, relmf, mfdu, bpr, ubpr, ubpr_nclip, ubpr_clipped, upl"},
      {"runs", "final trainings per method at the selected hyperparameters"},
      {"seed", "base seed; data generation uses it directly, run r uses seed + r"},
      {"epsilon_train", "relevance floor for the training split"},
      {"epsilon_test", "relevance floor for the test split"},
      {"out", "output directory"},
      {"threads", "worker threads for independent trainings"},
      {"grid_dim", "comma list of latent dimensions"},
      {"grid_lambda", "comma list of L2 weights"},
      {"grid_clip", "comma list of clipping thresholds for ubpr_clipped, each in [-10, 0]"},
      {"grid_search", "tune on validation DCG@5 (true) or use the first grid values (false)"},
      {"ks", "comma list of metric cutoffs"},
      {"cohorts", "also report cold-start users and rare items"},
      {"rare_item_threshold", "items with fewer training clicks are rare"},
      {"cold_start_threshold", "users with fewer training clicks are cold-start"},
      {"graded_relevance", "evaluate against gamma instead of the binary relevance draw"},
      {"learning_rate", "Adam learning rate"},
      {"batch_size", "mini-batch size"},
      {"max_epochs", "epoch cap"},
      {"patience", "early-stopping patience in epochs"},
      {"init_scale", "standard deviation of the factor initialization"},
      {"validation_fraction", "fraction of training cells held out for validation"},
      {"propensity_power", "exponent of the popularity propensity"},
      {"propensity_floor", "propensity assigned where the formula gives 0"},
      {"wmf_weight", "WMF confidence weight for clicked cells"},
      {"pointwise_negative_ratio", "pointwise negatives per click per epoch; 0 = full grid"},
  };
  return keys;
}

void apply_config_value(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "dataset") {
    c.dataset = value;
  } else if (key == "format") {
    c.format = parse_rating_format(value);
  } else if (key == "train_file") {
    c.train_file = value;
  } else if (key == "test_file") {
    c.test_file = value;
  } else if (key == "r_max") {
    c.r_max = static_cast<int>(to_uint(key, value));
  } else if (key == "methods") {
    c.methods.clear();
    for (const auto& m : split_list(value)) c.methods.push_back(parse_method(m));
  } else if (key == "runs") {
    c.runs = to_uint(key, value);
  } else if (key == "seed") {
    c.seed = to_uint(key, value);
  } else if (key == "epsilon_train") {
    c.epsilon_train = to_double(key, value);
  } else if (key == "epsilon_test") {
    c.epsilon_test = to_double(key, value);
  } else if (key == "out") {
    c.out = value;
  } else if (key == "threads") {
    c.threads = static_cast<unsigned>(to_uint(key, value));
  } else if (key == "grid_dim") {
    c.grid_dim.clear();
    for (const auto& v : split_list(value)) c.grid_dim.push_back(to_uint(key, v));
  } else if (key == "grid_lambda") {
    c.grid_lambda.clear();
    for (const auto& v : split_list(value)) c.grid_lambda.push_back(to_double(key, v));
  } else if (key == "grid_clip") {
    c.grid_clip.clear();
    for (const auto& v : split_list(value)) c.grid_clip.push_back(to_double(key, v));
  } else if (key == "grid_search") {
    c.grid_search = to_bool(key, value);
  } else if (key == "ks") {
    c.ks.clear();
    for (const auto& v : split_list(value)) c.ks.push_back(to_uint(key, v));
  } else if (key == "cohorts") {
    c.cohorts = to_bool(key, value);
  } else if (key == "rare_item_threshold") {
    c.rare_item_threshold = to_uint(key, value);
  } else if (key == "cold_start_threshold") {
    c.cold_start_threshold = to_uint(key, value);
  } else if (key == "graded_relevance") {
    c.graded_relevance = to_bool(key, value);
  } else if (key == "learning_rate") {
    c.learning_rate = to_double(key, value);
  } else if (key == "batch_size") {
    c.batch_size = to_uint(key, value);
  } else if (key == "max_epochs") {
    c.max_epochs = to_uint(key, value);
  } else if (key == "patience") {
    c.patience = to_uint(key, value);
  } else if (key == "init_scale") {
    c.init_scale = to_double(key, value);
  } else if (key == "validation_fraction") {
    c.validation_fraction = to_double(key, value);
  } else if (key == "propensity_power") {
    c.propensity_power = to_double(key, value);
  } else if (key == "propensity_floor") {
    c.propensity_floor = to_double(key, value);
  } else if (key == "wmf_weight") {
    c.wmf_weight = to_double(key, value);
  } else if (key == "pointwise_negative_ratio") {
    c.pointwise_negative_ratio = to_double(key, value);
  } else {
    throw ArgumentError("unknown config key '" + key + "'");
  }
}

void parse_config(ExperimentConfig& config, std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ArgumentError(source + ":" + std::to_string(line_number) + ": expected key=value");
    }
    try {
      apply_config_value(config, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ArgumentError& e) {
      throw ArgumentError(source + ":" + std::to_string(line_number) + ": " + e.what());
    } catch (const Error& e) {
      throw ArgumentError(source + ":" + std::to_string(line_number) + ": " + e.what());
    }
  }
}

void load_config_file(ExperimentConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config file " + path.string());
  parse_config(config, in, path.string());
}

void ExperimentConfig::validate() const {
  if (runs == 0) throw ArgumentError("runs must be >= 1");
  if (methods.empty()) throw ArgumentError("methods must not be empty");
  for (Method m : methods) {
    if (m == Method::kIdeal) throw ArgumentError("the ideal risk is not an experiment method");
  }
  if (grid_dim.empty() || grid_lambda.empty()) throw ArgumentError("grid must not be empty");
  for (auto d : grid_dim) {
    if (d == 0) throw ArgumentError("grid_dim values must be >= 1");
  }
  for (double l : grid_lambda) {
    if (!(l >= 0.0)) throw ArgumentError("grid_lambda values must be >= 0");
  }
  if (grid_clip.empty()) throw ArgumentError("grid_clip must not be empty");
  for (double t : grid_clip) {
    if (!(t >= -10.0 && t <= 0.0)) throw ArgumentError("grid_clip values must lie in [-10, 0]");
  }
  if (ks.empty()) throw ArgumentError("ks must not be empty");
  for (auto k : ks) {
    if (k == 0) throw ArgumentError("ks values must be >= 1");
  }
  if (!(epsilon_train >= 0.0 && epsilon_train < 1.0) || !(epsilon_test >= 0.0 && epsilon_test < 1.0)) {
    throw ArgumentError("epsilon values must lie in [0, 1)");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ArgumentError("validation_fraction must lie in (0, 1)");
  }
  if (threads == 0) throw ArgumentError("threads must be >= 1");
  if (!(wmf_weight >= 1.0)) throw ArgumentError("wmf_weight must be >= 1");
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream out;
  out << "dataset=" << dataset.generic_string() << '\n'
      << "format=" << to_string(format) << '\n'
      << "train_file=" << train_path().filename().string() << '\n'
      << "test_file=" << test_path().filename().string() << '\n'
      << "r_max=" << r_max << '\n'
      << "methods=" << join(methods, [](Method m) { return std::string(to_string(m)); }) << '\n'
      << "runs=" << runs << '\n'
      << "seed=" << seed << '\n'
      << "epsilon_train=" << fmt(epsilon_train) << '\n'
      << "epsilon_test=" << fmt(epsilon_test) << '\n'
      << "grid_dim=" << join(grid_dim, [](std::size_t d) { return std::to_string(d); }) << '\n'
      << "grid_lambda=" << join(grid_lambda, fmt) << '\n'
      << "grid_clip=" << join(grid_clip, fmt) << '\n'
      << "grid_search=" << (grid_search ? "true" : "false") << '\n'
      << "ks=" << join(ks, [](std::size_t k) { return std::to_string(k); }) << '\n'
      << "cohorts=" << (cohorts ? "true" : "false") << '\n'
      << "rare_item_threshold=" << rare_item_threshold << '\n'
      << "cold_start_threshold=" << cold_start_threshold << '\n'
      << "graded_relevance=" << (graded_relevance ? "true" : "false") << '\n'
      << "learning_rate=" << fmt(learning_rate) << '\n'
      << "batch_size=" << batch_size << '\n'
      << "max_epochs=" << max_epochs << '\n'
      << "patience=" << patience << '\n'
      << "init_scale=" << fmt(init_scale) << '\n'
      << "validation_fraction=" << fmt(validation_fraction) << '\n'
      << "propensity_power=" << fmt(propensity_power) << '\n'
      << "propensity_floor=" << fmt(propensity_floor) << '\n'
      << "wmf_weight=" << fmt(wmf_weight) << '\n'
      << "pointwise_negative_ratio=" << fmt(pointwise_negative_ratio) << '\n';
  return out.str();
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : canonical_text()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path ExperimentConfig::train_path() const {
  if (!train_file.empty()) return dataset / train_file;
  if (format == RatingFormat::kDense) return dataset / "train.ascii";
  const auto yahoo = dataset / "ydata-ymusic-rating-study-v1-u.train.txt";
  if (std::filesystem::exists(yahoo)) return yahoo;
  return dataset / "train.txt";
}

std::filesystem::path ExperimentConfig::test_path() const {
  if (!test_file.empty()) return dataset / test_file;
  if (format == RatingFormat::kDense) return dataset / "test.ascii";
  const auto yahoo = dataset / "ydata-ymusic-rating-study-v1-u.test.txt";
  if (std::filesystem::exists(yahoo)) return yahoo;
  return dataset / "test.txt";
}

}  // namespace upl
