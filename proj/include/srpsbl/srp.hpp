#ifndef SRPSBL_SRP_HPP
#define SRPSBL_SRP_HPP

#include <iosfwd>
#include <vector>

#include "srpsbl/geometry.hpp"
#include "srpsbl/localize.hpp"
#include "srpsbl/stft.hpp"

namespace srpsbl {

/// Magnitudes |P_m P_m'^*| below this are treated as empty bins.
inline constexpr double kPhatFloor = 1e-12;

/// PHAT-whitened cross-spectra P_m P_m'^* / |P_m P_m'^*|, one L x T matrix
/// per band bin, rows in MicArray pair order. Floored entries are exactly 0.
struct WhitenedCrossSpectra {
  std::vector<MatrixXcd> bins;
  std::vector<MicPair> pairs;
  FrequencyBand band;

  int pair_count() const { return static_cast<int>(pairs.size()); }
  int frame_count() const { return bins.empty() ? 0 : static_cast<int>(bins[0].cols()); }
};

/// Whitened cross-spectrum of one bin value pair.
cdouble phat_whiten(cdouble p_a, cdouble p_b);

WhitenedCrossSpectra whiten(const Spectrogram& spec, const std::vector<MicPair>& pairs,
                            const FrequencyBand& band);
/// Every one-sided bin.
WhitenedCrossSpectra whiten(const Spectrogram& spec, const std::vector<MicPair>& pairs);

/// Steered response at one (bin, frame): Re(sum_l W_l e^{j 2 pi f tau_l}).
/// `band_index` addresses cross.bins; `candidate_tdoas` has one entry per pair.
double srp_bin(const WhitenedCrossSpectra& cross, int band_index, int frame,
               const VectorXd& candidate_tdoas, double bin_frequency);

/// Real SRP map tensor Z (N x T x K) stored frequency-last: slice k is the
/// contiguous N x T matrix Z_k.
struct SrpTensor {
  std::vector<MatrixXd> slices;
  DoaGrid grid;
  FrequencyBand band;

  int point_count() const { return slices.empty() ? 0 : static_cast<int>(slices[0].rows()); }
  int frame_count() const { return slices.empty() ? 0 : static_cast<int>(slices[0].cols()); }
  int bin_count() const { return static_cast<int>(slices.size()); }
  double value(int n, int t, int k) const { return slices[static_cast<std::size_t>(k)](n, t); }
};

/// Far-field TDOAs for every grid point and pair (N x L).
MatrixXd tdoa_table(const MicArray& array, const DoaGrid& grid);

SrpTensor srp_tensor(const WhitenedCrossSpectra& cross, const DoaGrid& grid,
                     const MicArray& array);

/// Time-frequency average of the tensor, one value per grid point.
VectorXd averaged_map(const SrpTensor& tensor);

/// SRP-PHAT: largest points of the averaged map, thinned by separation.
PeakSelection srp_phat_localize(const SrpTensor& tensor, int n_sources,
                                double min_separation_deg = 0.0);

/// CSV with columns index,elevation_deg,azimuth_deg,value.
void write_map_csv(std::ostream& out, const DoaGrid& grid, const VectorXd& values);

}  // namespace srpsbl

#endif  // SRPSBL_SRP_HPP
