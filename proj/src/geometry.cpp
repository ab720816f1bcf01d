#include "srpsbl/geometry.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace srpsbl {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::uint64_t fnv1a(std::uint64_t hash, const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

int checked_count(double lo, double hi, double step, const char* axis) {
  if (!(step > 0.0)) {
    throw ConfigError(std::string(axis) + " step must be positive");
  }
  if (hi < lo) {
    throw ConfigError(std::string(axis) + " range is empty");
  }
  const double ratio = (hi - lo) / step;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError(std::string(axis) + " step does not evenly divide its range");
  }
  return static_cast<int>(rounded) + 1;
}

}  // namespace

MicArray::MicArray(std::vector<Vec3> positions, double sound_speed)
    : positions_(std::move(positions)), sound_speed_(sound_speed) {
  if (positions_.size() < 2) {
    throw ConfigError("a microphone array needs at least two elements");
  }
  if (!(sound_speed_ > 0.0) || !std::isfinite(sound_speed_)) {
    throw ConfigError("sound speed must be positive");
  }
  for (std::size_t a = 0; a < positions_.size(); ++a) {
    if (!positions_[a].allFinite()) {
      throw ConfigError("microphone position is not finite");
    }
    for (std::size_t b = a + 1; b < positions_.size(); ++b) {
      if ((positions_[a] - positions_[b]).norm() == 0.0) {
        throw ConfigError("microphones " + std::to_string(a) + " and " + std::to_string(b) +
                          " share a position");
      }
    }
  }
  const int m = size();
  pairs_.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      pairs_.push_back({a, b});
    }
  }
}

Vec3 MicArray::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const auto& p : positions_) c += p;
  return c / static_cast<double>(positions_.size());
}

std::uint64_t MicArray::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : positions_) h = fnv1a(h, p.data(), 3 * sizeof(double));
  return fnv1a(h, &sound_speed_, sizeof(double));
}

MicArray uma16_array(double sound_speed) {
  constexpr double pitch = 0.042;
  std::vector<Vec3> pos;
  pos.reserve(16);
  for (int row = 0; row < 4; ++row) {
    for (int col = 0; col < 4; ++col) {
      pos.emplace_back((col - 1.5) * pitch, 0.0, (1.5 - row) * pitch);
    }
  }
  return MicArray(std::move(pos), sound_speed);
}

MicArray parse_array_geometry(std::istream& in, double sound_speed) {
  std::vector<Vec3> pos;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    Vec3 p;
    std::string extra;
    if (!(ss >> p.x() >> p.y() >> p.z()) || (ss >> extra)) {
      throw ConfigError("array geometry line " + std::to_string(lineno) +
                        ": expected three coordinates");
    }
    pos.push_back(p);
  }
  return MicArray(std::move(pos), sound_speed);
}

MicArray load_array_geometry(const std::string& path, double sound_speed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open array geometry '" + path + "'");
  return parse_array_geometry(in, sound_speed);
}

Vec3 direction_from_angles(double elevation_deg, double azimuth_deg) {
  const double el = elevation_deg * kDeg;
  const double az = azimuth_deg * kDeg;
  Vec3 u(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  return u / u.norm();
}

GridPoint make_grid_point(double elevation_deg, double azimuth_deg) {
  return {elevation_deg, azimuth_deg, direction_from_angles(elevation_deg, azimuth_deg)};
}

Eigen::Matrix3Xd DoaGrid::unit_matrix() const {
  Eigen::Matrix3Xd u(3, size());
  for (int i = 0; i < size(); ++i) u.col(i) = points[static_cast<std::size_t>(i)].unit;
  return u;
}

DoaGrid build_doa_grid(double elevation_step, double azimuth_step) {
  GridSpec spec;
  spec.elevation_step = elevation_step;
  spec.azimuth_step = azimuth_step;
  return build_doa_grid(spec);
}

DoaGrid build_doa_grid(const GridSpec& spec) {
  if (spec.elevation_min < -90.0 || spec.elevation_max > 90.0) {
    throw ConfigError("elevation range must lie within [-90, 90]");
  }
  DoaGrid grid;
  grid.spec = spec;
  grid.elevation_count =
      checked_count(spec.elevation_min, spec.elevation_max, spec.elevation_step, "elevation");
  grid.azimuth_count =
      checked_count(spec.azimuth_min, spec.azimuth_max, spec.azimuth_step, "azimuth");
  grid.points.reserve(static_cast<std::size_t>(grid.elevation_count * grid.azimuth_count));
  for (int ie = 0; ie < grid.elevation_count; ++ie) {
    const double el = spec.elevation_min + ie * spec.elevation_step;
    for (int ia = 0; ia < grid.azimuth_count; ++ia) {
      const double az = spec.azimuth_min + ia * spec.azimuth_step;
      grid.points.push_back(make_grid_point(el, az));
    }
  }
  return grid;
}

int nearest_grid_point(const DoaGrid& grid, const Vec3& direction) {
  int best = 0;
  double best_cos = -2.0;
  for (int i = 0; i < grid.size(); ++i) {
    const double c = grid[i].unit.dot(direction);
    if (c > best_cos) {
      best_cos = c;
      best = i;
    }
  }
  return best;
}

double tdoa(const MicArray& array, MicPair pair, const Vec3& target, Propagation mode) {
  const Vec3& a = array.position(pair.first);
  const Vec3& b = array.position(pair.second);
  if (mode == Propagation::FarField) {
    return tdoa_far_field(target, a, b, array.sound_speed());
  }
  if ((target - a).norm() == 0.0 || (target - b).norm() == 0.0) {
    throw DomainError("near-field target coincides with a microphone");
  }
  return tdoa_near_field(target, a, b, array.sound_speed());
}

cdouble green(const Vec3& candidate, const Vec3& mic_position, double wavenumber,
              Propagation mode) {
  if (!(wavenumber >= 0.0)) throw DomainError("wavenumber must be non-negative");
  if (mode == Propagation::FarField) {
    return green_far_field(candidate, mic_position, wavenumber);
  }
  if ((mic_position - candidate).norm() == 0.0) {
    throw DomainError("near-field Green's function is singular at zero distance");
  }
  return green_near_field(candidate, mic_position, wavenumber);
}

cdouble rtf(const Vec3& candidate, const Vec3& mic_a, const Vec3& mic_b, double wavenumber,
            Propagation mode) {
  return green(candidate, mic_a, wavenumber, mode) *
         std::conj(green(candidate, mic_b, wavenumber, mode));
}

cdouble rtf(const MicArray& array, MicPair pair, const Vec3& candidate, double wavenumber,
            Propagation mode) {
  return rtf(candidate, array.position(pair.first), array.position(pair.second), wavenumber,
             mode);
}

double tdoa_from_rtf(cdouble rtf_value, double frequency_hz) {
  if (!(frequency_hz > 0.0)) throw DomainError("frequency must be positive");
  const double mag = std::abs(rtf_value);
  if (std::abs(mag - 1.0) > 1e-6) {
    throw DomainError("TDOA extraction needs a unit-magnitude transfer function");
  }
  // tau = ln(conj(H)) / (j 2 pi f); the principal log limits |2 pi f tau| < pi.
  return -std::arg(rtf_value) / (2.0 * std::numbers::pi * frequency_hz);
}

}  // namespace srpsbl
