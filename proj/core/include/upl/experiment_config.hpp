#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "upl/dataset.hpp"
#include "upl/losses.hpp"

namespace upl {

// Everything that determines an experiment's outputs. Serialized as flat
// key=value text; see config_keys() for the schema.
struct ExperimentConfig {
  std::filesystem::path dataset;  // directory holding the raw train/test files
  RatingFormat format = RatingFormat::kDense;
  std::string train_file;  // empty: format default (train.ascii / train.txt)
  std::string test_file;
  int r_max = 5;
  std::vector<Method> methods{Method::kWmf,       Method::kRelmf,       Method::kMfdu,
                              Method::kBpr,       Method::kUbprClipped, Method::kUbprNclip,
                              Method::kUpl};
  std::size_t runs = 50;
  std::uint64_t seed = 0;
  double epsilon_train = 0.1;
  double epsilon_test = 0.0;
  std::filesystem::path out = "results";
  unsigned threads = 1;

  std::vector<std::size_t> grid_dim{100, 200, 300};
  std::vector<double> grid_lambda{1e-7, 1e-5, 1e-3};
  std::vector<double> grid_clip{0.0, -0.1, -1.0, -10.0};
  bool grid_search = true;  // false: use the first value of each grid

  std::vector<std::size_t> ks{3, 5, 8};
  bool cohorts = true;
  std::size_t rare_item_threshold = 100;
  std::size_t cold_start_threshold = 6;
  bool graded_relevance = false;

  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 200;
  std::size_t patience = 5;
  double init_scale = 0.01;
  double validation_fraction = 0.1;
  double propensity_power = 0.5;
  double propensity_floor = 1e-2;
  double wmf_weight = 10.0;
  double pointwise_negative_ratio = 0.0;

  // Throws ArgumentError.
  void validate() const;

  // Canonical "key=value" lines in schema order. Output paths and thread
  // count are excluded: they do not influence results.
  std::string canonical_text() const;
  // FNV-1a 64 of canonical_text(), as 16 hex digits.
  std::string hash() const;

  std::filesystem::path train_path() const;
  std::filesystem::path test_path() const;
};

// Documented schema: key -> one-line description.
const std::map<std::string, std::string>& config_keys();

// Applies one key=value assignment. Unknown keys and bad values throw ArgumentError.
void apply_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

// Reads a flat key=value file ('#' comments allowed) onto `config`.
void load_config_file(ExperimentConfig& config, const std::filesystem::path& path);
void parse_config(ExperimentConfig& config, std::istream& in, const std::string& source = "config");

}  // namespace upl
