#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace upl {

inline constexpr double kDefaultPropensityPower = 0.5;
inline constexpr double kDefaultPropensityFloor = 1e-2;

// Popularity-based exposure propensities, one value per item.
struct PropensityTable {
  std::vector<double> theta_click;     // (n_i / max n)^power, floored where 0
  std::vector<double> theta_nonclick;  // (1 - n_i / max n)^power, floored where 0
  double power = kDefaultPropensityPower;
  double floor = kDefaultPropensityFloor;
  std::size_t max_count = 0;

  std::size_t num_items() const noexcept { return theta_click.size(); }
};

// (n_i / max_j n_j)^power. Items whose value is exactly zero get `floor`.
// Throws EstimationError when every count is zero, DomainError on bad power/floor.
std::vector<double> estimate_click_propensity(std::span<const std::size_t> click_counts,
                                              double power = kDefaultPropensityPower,
                                              double floor = kDefaultPropensityFloor);

// (1 - n_i / max_j n_j)^power; the most-clicked items get `floor` instead of 0.
std::vector<double> estimate_nonclick_propensity(std::span<const std::size_t> click_counts,
                                                 double power = kDefaultPropensityPower,
                                                 double floor = kDefaultPropensityFloor);

PropensityTable estimate_propensities(std::span<const std::size_t> click_counts,
                                      double power = kDefaultPropensityPower,
                                      double floor = kDefaultPropensityFloor);

// P(o = 1 | c = 0) = theta (1 - gamma) / (1 - theta gamma).
// Throws SingularityError when theta * gamma >= 1.
double posterior_exposure(double theta, double gamma);

// Two-column text "item<TAB>value", values printed with %.17g.
void save_propensities(std::span<const double> values, const std::filesystem::path& path);
std::vector<double> load_propensities(const std::filesystem::path& path);

}  // namespace upl
