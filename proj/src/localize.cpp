#include "srpsbl/localize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace srpsbl {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::vector<int> order_by_descending(const VectorXd& values, const std::vector<int>& candidates) {
  std::vector<int> order = candidates;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values(a) > values(b); });
  return order;
}

PeakSelection thin_by_separation(const VectorXd& values, const DoaGrid& grid,
                                 const std::vector<int>& ordered, int n_peaks,
                                 double min_separation_deg) {
  PeakSelection out;
  for (int idx : ordered) {
    if (static_cast<int>(out.estimates.size()) >= n_peaks) break;
    const bool too_close = std::any_of(out.estimates.begin(), out.estimates.end(), [&](const auto& e) {
      return great_circle_angle(grid[e.grid_index], grid[idx]) < min_separation_deg;
    });
    if (too_close) continue;
    DoaEstimate e;
    e.elevation_deg = grid[idx].elevation_deg;
    e.azimuth_deg = grid[idx].azimuth_deg;
    e.score = values(idx);
    e.rank = static_cast<int>(out.estimates.size()) + 1;
    e.grid_index = idx;
    out.estimates.push_back(e);
  }
  out.shortfall = static_cast<int>(out.estimates.size()) < n_peaks;
  return out;
}

void check_peak_args(const VectorXd& values, const DoaGrid& grid, int n_peaks,
                     double min_separation_deg) {
  if (values.size() != grid.size()) throw ConfigError("map size does not match grid size");
  if (n_peaks < 1) throw ConfigError("number of peaks must be at least 1");
  if (!(min_separation_deg >= 0.0)) throw ConfigError("minimum separation must be non-negative");
}

}  // namespace

double great_circle_angle(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(a.dot(b), -1.0, 1.0)) * kRadToDeg;
}

double great_circle_angle(const GridPoint& a, const GridPoint& b) {
  return great_circle_angle(a.unit, b.unit);
}

PeakSelection pick_peaks(const VectorXd& weights, const DoaGrid& grid, int n_peaks,
                         double min_separation_deg) {
  check_peak_args(weights, grid, n_peaks, min_separation_deg);
  std::vector<int> candidates;
  candidates.reserve(static_cast<std::size_t>(grid.size()));
  for (int i = 0; i < grid.size(); ++i) {
    if (std::isfinite(weights(i))) candidates.push_back(i);
  }
  return thin_by_separation(weights, grid, order_by_descending(weights, candidates), n_peaks,
                            min_separation_deg);
}

LocalizationError localization_error(const std::vector<DoaEstimate>& estimates,
                                     const std::vector<GridPoint>& truths) {
  if (truths.empty()) throw DomainError("localization error needs at least one true DOA");
  const std::size_t j = truths.size();

  std::vector<DoaEstimate> used = estimates;
  if (used.size() > j) {
    std::stable_sort(used.begin(), used.end(),
                     [](const auto& a, const auto& b) { return a.score > b.score; });
    used.resize(j);
  }

  LocalizationError le;
  le.shortfall = used.size() < j;
  double total = 180.0 * static_cast<double>(j - used.size());
  for (const auto& e : used) {
    const Vec3 u = direction_from_angles(e.elevation_deg, e.azimuth_deg);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : truths) best = std::min(best, great_circle_angle(u, t.unit));
    total += best;
  }
  le.degrees = total / static_cast<double>(j);
  return le;
}

}  // namespace srpsbl
