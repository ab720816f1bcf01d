#include "srpsbl/srp.hpp"

#include <numbers>
#include <ostream>

namespace srpsbl {

cdouble phat_whiten(cdouble p_a, cdouble p_b) {
  const cdouble cross = p_a * std::conj(p_b);
  const double mag = std::abs(cross);
  return mag < kPhatFloor ? cdouble(0.0, 0.0) : cross / mag;
}

WhitenedCrossSpectra whiten(const Spectrogram& spec, const std::vector<MicPair>& pairs,
                            const FrequencyBand& band) {
  WhitenedCrossSpectra out;
  out.pairs = pairs;
  out.band = band;
  const int frames = spec.frame_count();
  const int l_count = static_cast<int>(pairs.size());
  for (int k : band.bins) {
    if (k < 0 || k >= spec.bin_count()) throw ConfigError("band bin outside the spectrogram");
  }
  for (const auto& p : pairs) {
    if (p.first < 0 || p.second < 0 || p.first >= spec.channel_count() ||
        p.second >= spec.channel_count()) {
      throw ConfigError("microphone pair outside the spectrogram channels");
    }
  }
  out.bins.reserve(band.bins.size());
  for (int k : band.bins) {
    MatrixXcd w(l_count, frames);
    for (int l = 0; l < l_count; ++l) {
      const auto& a = spec.channels[static_cast<std::size_t>(pairs[static_cast<std::size_t>(l)].first)];
      const auto& b = spec.channels[static_cast<std::size_t>(pairs[static_cast<std::size_t>(l)].second)];
      for (int t = 0; t < frames; ++t) w(l, t) = phat_whiten(a(k, t), b(k, t));
    }
    out.bins.push_back(std::move(w));
  }
  return out;
}

WhitenedCrossSpectra whiten(const Spectrogram& spec, const std::vector<MicPair>& pairs) {
  FrequencyBand all;
  all.sample_rate = spec.sample_rate;
  all.fft_length = spec.frame_length;
  for (int k = 0; k < spec.bin_count(); ++k) all.bins.push_back(k);
  return whiten(spec, pairs, all);
}

double srp_bin(const WhitenedCrossSpectra& cross, int band_index, int frame,
               const VectorXd& candidate_tdoas, double bin_frequency) {
  const auto& w = cross.bins[static_cast<std::size_t>(band_index)];
  if (candidate_tdoas.size() != w.rows()) throw ConfigError("one TDOA per pair is required");
  double acc = 0.0;
  const double omega = 2.0 * std::numbers::pi * bin_frequency;
  for (int l = 0; l < w.rows(); ++l) {
    acc += (w(l, frame) * std::polar(1.0, omega * candidate_tdoas(l))).real();
  }
  return acc;
}

MatrixXd tdoa_table(const MicArray& array, const DoaGrid& grid) {
  MatrixXd tau(grid.size(), array.pair_count());
  for (int n = 0; n < grid.size(); ++n) {
    for (int l = 0; l < array.pair_count(); ++l) {
      tau(n, l) = tdoa(array, array.pairs()[static_cast<std::size_t>(l)], grid[n].unit,
                       Propagation::FarField);
    }
  }
  return tau;
}

SrpTensor srp_tensor(const WhitenedCrossSpectra& cross, const DoaGrid& grid,
                     const MicArray& array) {
  if (cross.band.bins.empty()) throw ConfigError("SRP tensor needs a non-empty frequency band");
  if (cross.pair_count() != array.pair_count()) {
    throw ConfigError("cross-spectra pair count does not match the array");
  }
  SrpTensor out;
  out.grid = grid;
  out.band = cross.band;
  const MatrixXd tau = tdoa_table(array, grid);
  out.slices.reserve(cross.bins.size());
  for (int k = 0; k < cross.band.size(); ++k) {
    const double omega = 2.0 * std::numbers::pi * cross.band.frequency(k);
    const MatrixXcd steer = (omega * tau).unaryExpr([](double phase) { return std::polar(1.0, phase); });
    out.slices.push_back((steer * cross.bins[static_cast<std::size_t>(k)]).real());
  }
  return out;
}

VectorXd averaged_map(const SrpTensor& tensor) {
  VectorXd acc = VectorXd::Zero(tensor.point_count());
  for (const auto& z : tensor.slices) acc += z.rowwise().sum();
  const double count = static_cast<double>(tensor.bin_count()) * tensor.frame_count();
  return count > 0 ? VectorXd(acc / count) : acc;
}

PeakSelection srp_phat_localize(const SrpTensor& tensor, int n_sources,
                                double min_separation_deg) {
  if (n_sources < 1) throw ConfigError("number of sources must be at least 1");
  return pick_peaks(averaged_map(tensor), tensor.grid, n_sources, min_separation_deg);
}

void write_map_csv(std::ostream& out, const DoaGrid& grid, const VectorXd& values) {
  out << "index,elevation_deg,azimuth_deg,value\n";
  out.precision(17);
  for (int i = 0; i < grid.size(); ++i) {
    out << i << ',' << grid[i].elevation_deg << ',' << grid[i].azimuth_deg << ',' << values(i)
        << '\n';
  }
}

}  // namespace srpsbl
