#ifndef SRPSBL_GEOMETRY_HPP
#define SRPSBL_GEOMETRY_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "srpsbl/types.hpp"

namespace srpsbl {

inline constexpr double kDefaultSoundSpeed = 343.0;

enum class Propagation { NearField, FarField };

/// Ordered microphone pair with first < second.
struct MicPair {
  int first = 0;
  int second = 0;
};

/// Microphone positions in meters plus the speed of sound.
///
/// Pairs are enumerated lexicographically: (0,1), (0,2), ..., (0,M-1),
/// (1,2), ..., (M-2,M-1). Every pair-indexed tensor in the library uses
/// this order.
class MicArray {
 public:
  explicit MicArray(std::vector<Vec3> positions, double sound_speed = kDefaultSoundSpeed);

  int size() const { return static_cast<int>(positions_.size()); }
  int pair_count() const { return static_cast<int>(pairs_.size()); }
  const Vec3& position(int m) const { return positions_[static_cast<std::size_t>(m)]; }
  const std::vector<Vec3>& positions() const { return positions_; }
  const std::vector<MicPair>& pairs() const { return pairs_; }
  double sound_speed() const { return sound_speed_; }
  Vec3 centroid() const;

  /// Stable 64-bit fingerprint of positions and sound speed.
  std::uint64_t fingerprint() const;

 private:
  std::vector<Vec3> positions_;
  std::vector<MicPair> pairs_;
  double sound_speed_;
};

/// 4x4 planar grid with 42 mm pitch, centred on the origin and lying in the
/// x-z plane so that the front hemisphere (y >= 0) is unambiguous.
MicArray uma16_array(double sound_speed = kDefaultSoundSpeed);

/// Plain-text geometry: one microphone per line as "x y z" in meters.
/// Blank lines and lines starting with '#' are ignored.
MicArray parse_array_geometry(std::istream& in, double sound_speed = kDefaultSoundSpeed);
MicArray load_array_geometry(const std::string& path, double sound_speed = kDefaultSoundSpeed);

/// Unit vector for (elevation, azimuth) in degrees. Azimuth turns from +x
/// toward +y, elevation lifts from the x-y plane toward +z.
Vec3 direction_from_angles(double elevation_deg, double azimuth_deg);

struct GridPoint {
  double elevation_deg = 0.0;
  double azimuth_deg = 0.0;
  Vec3 unit = Vec3::UnitX();
};

GridPoint make_grid_point(double elevation_deg, double azimuth_deg);

/// Inclusive angular ranges and steps for a candidate grid.
struct GridSpec {
  double elevation_min = -90.0;
  double elevation_max = 90.0;
  double elevation_step = 15.0;
  double azimuth_min = 0.0;
  double azimuth_max = 180.0;
  double azimuth_step = 10.0;
};

/// Elevation-major grid of candidate directions: point index is
/// ie * azimuth_count + ia.
struct DoaGrid {
  std::vector<GridPoint> points;
  GridSpec spec;
  int elevation_count = 0;
  int azimuth_count = 0;

  int size() const { return static_cast<int>(points.size()); }
  const GridPoint& operator[](int i) const { return points[static_cast<std::size_t>(i)]; }
  int index(int ie, int ia) const { return ie * azimuth_count + ia; }
  /// Points stacked as columns (3 x size).
  Eigen::Matrix3Xd unit_matrix() const;
};

DoaGrid build_doa_grid(double elevation_step, double azimuth_step);
DoaGrid build_doa_grid(const GridSpec& spec);

/// Index of the grid point with the largest cosine to `direction`
/// (lowest index on ties).
int nearest_grid_point(const DoaGrid& grid, const Vec3& direction);

// Expression-level kernels. Positions are 3-vectors of any Eigen type.

template <typename DerivedY, typename DerivedA, typename DerivedB>
typename DerivedY::Scalar tdoa_near_field(const Eigen::MatrixBase<DerivedY>& source,
                                          const Eigen::MatrixBase<DerivedA>& mic_a,
                                          const Eigen::MatrixBase<DerivedB>& mic_b,
                                          typename DerivedY::Scalar sound_speed) {
  return ((source - mic_a).norm() - (source - mic_b).norm()) / sound_speed;
}

template <typename DerivedY, typename DerivedA, typename DerivedB>
typename DerivedY::Scalar tdoa_far_field(const Eigen::MatrixBase<DerivedY>& direction,
                                         const Eigen::MatrixBase<DerivedA>& mic_a,
                                         const Eigen::MatrixBase<DerivedB>& mic_b,
                                         typename DerivedY::Scalar sound_speed) {
  return (mic_a - mic_b).dot(direction) / sound_speed;
}

template <typename DerivedY, typename DerivedX>
std::complex<typename DerivedY::Scalar> green_far_field(const Eigen::MatrixBase<DerivedY>& direction,
                                                        const Eigen::MatrixBase<DerivedX>& mic,
                                                        typename DerivedY::Scalar wavenumber) {
  using std::polar;
  return polar(typename DerivedY::Scalar(1), -wavenumber * direction.dot(mic));
}

/// Free-field point source. Caller guarantees a non-zero distance.
template <typename DerivedY, typename DerivedX>
std::complex<typename DerivedY::Scalar> green_near_field(const Eigen::MatrixBase<DerivedY>& source,
                                                         const Eigen::MatrixBase<DerivedX>& mic,
                                                         typename DerivedY::Scalar wavenumber) {
  using Scalar = typename DerivedY::Scalar;
  const Scalar r = (mic - source).norm();
  return std::polar(Scalar(1) / (Scalar(4) * std::numbers::pi_v<Scalar> * r), wavenumber * r);
}

/// TDOA in seconds. `target` is a position (near field) or a unit direction
/// (far field). Antisymmetric under swapping the pair.
double tdoa(const MicArray& array, MicPair pair, const Vec3& target, Propagation mode);

/// Green's function from a candidate to one microphone.
cdouble green(const Vec3& candidate, const Vec3& mic_position, double wavenumber,
              Propagation mode);

/// Relative transfer function G_m * conj(G_m') of a pair.
cdouble rtf(const Vec3& candidate, const Vec3& mic_a, const Vec3& mic_b, double wavenumber,
            Propagation mode);
cdouble rtf(const MicArray& array, MicPair pair, const Vec3& candidate, double wavenumber,
            Propagation mode);

/// Recovers the far-field TDOA from a unit-magnitude RTF at `frequency_hz`.
/// Valid only while |2 pi f tau| < pi; larger delays come back wrapped.
double tdoa_from_rtf(cdouble rtf_value, double frequency_hz);

inline double bin_frequency(int bin, double sample_rate, int fft_length) {
  return static_cast<double>(bin) * sample_rate / static_cast<double>(fft_length);
}

inline double wavenumber(double frequency_hz, double sound_speed) {
  return 2.0 * std::numbers::pi * frequency_hz / sound_speed;
}

}  // namespace srpsbl

#endif  // SRPSBL_GEOMETRY_HPP
