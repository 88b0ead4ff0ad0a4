#include "upl/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "upl/errors.hpp"

namespace upl {
namespace {

void check_args(std::span<const std::size_t> counts, double power, double floor) {
  if (!(power > 0.0) || !std::isfinite(power)) throw DomainError("propensity power must be > 0");
  if (!(floor > 0.0 && floor <= 1.0)) throw DomainError("propensity floor must lie in (0, 1]");
  if (counts.empty() || *std::max_element(counts.begin(), counts.end()) == 0) {
    throw EstimationError("cannot estimate propensities: no item has a click");
  }
}

}  // namespace

std::vector<double> estimate_click_propensity(std::span<const std::size_t> click_counts,
                                              double power, double floor) {
  check_args(click_counts, power, floor);
  const auto max_count =
      static_cast<double>(*std::max_element(click_counts.begin(), click_counts.end()));
  std::vector<double> out;
  out.reserve(click_counts.size());
  for (std::size_t n : click_counts) {
    const double value = std::pow(static_cast<double>(n) / max_count, power);
    out.push_back(value > 0.0 ? value : floor);
  }
  return out;
}

std::vector<double> estimate_nonclick_propensity(std::span<const std::size_t> click_counts,
                                                 double power, double floor) {
  check_args(click_counts, power, floor);
  const auto max_count =
      static_cast<double>(*std::max_element(click_counts.begin(), click_counts.end()));
  std::vector<double> out;
  out.reserve(click_counts.size());
  for (std::size_t n : click_counts) {
    const double value = std::pow(1.0 - static_cast<double>(n) / max_count, power);
    out.push_back(value > 0.0 ? value : floor);
  }
  return out;
}

PropensityTable estimate_propensities(std::span<const std::size_t> click_counts, double power,
                                      double floor) {
  PropensityTable table;
  table.theta_click = estimate_click_propensity(click_counts, power, floor);
  table.theta_nonclick = estimate_nonclick_propensity(click_counts, power, floor);
  table.power = power;
  table.floor = floor;
  table.max_count = *std::max_element(click_counts.begin(), click_counts.end());
  return table;
}

double posterior_exposure(double theta, double gamma) {
  if (!(theta > 0.0 && theta <= 1.0)) throw DomainError("theta must lie in (0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in [0, 1]");
  const double denominator = 1.0 - theta * gamma;
  if (!(denominator > 0.0)) throw SingularityError("posterior exposure undefined at theta*gamma = 1");
  return theta * (1.0 - gamma) / denominator;
}

void save_propensities(std::span<const double> values, const std::filesystem::path& path) {
  std::ofstream out(path);
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", values[i]);
    out << i << '\t' << buf << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<double> load_propensities(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  std::vector<double> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t index = 0;
    double value = 0.0;
    if (!(ss >> index >> value) || index != out.size()) {
      throw ParseError("propensity table: expected 'item value' with consecutive items", line_number);
    }
    out.push_back(value);
  }
  return out;
}

}  // namespace upl
