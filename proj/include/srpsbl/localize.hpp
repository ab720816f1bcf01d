#ifndef SRPSBL_LOCALIZE_HPP
#define SRPSBL_LOCALIZE_HPP

#include <vector>

#include "srpsbl/geometry.hpp"

namespace srpsbl {

struct DoaEstimate {
  double elevation_deg = 0.0;
  double azimuth_deg = 0.0;
  double score = 0.0;
  int rank = 1;       // 1-based
  int grid_index = -1;
};

struct PeakSelection {
  std::vector<DoaEstimate> estimates;
  bool shortfall = false;  // fewer peaks than requested
};

/// Great-circle angle in degrees between two directions.
double great_circle_angle(const GridPoint& a, const GridPoint& b);
double great_circle_angle(const Vec3& a, const Vec3& b);

/// Greedy peak picking: visit points by descending weight (ties by lowest
/// index) and accept one unless it lies closer than `min_separation_deg` to
/// an accepted estimate. Non-finite weights are skipped.
PeakSelection pick_peaks(const VectorXd& weights, const DoaGrid& grid, int n_peaks,
                         double min_separation_deg);

/// Mean angle between each estimate and its nearest truth. Missing
/// estimates (fewer than truths) count as 180 degrees each.
struct LocalizationError {
  double degrees = 0.0;
  bool shortfall = false;
};

LocalizationError localization_error(const std::vector<DoaEstimate>& estimates,
                                     const std::vector<GridPoint>& truths);

}  // namespace srpsbl

#endif  // SRPSBL_LOCALIZE_HPP
