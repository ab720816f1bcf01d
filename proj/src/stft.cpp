#include "srpsbl/stft.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <ostream>

#include <unsupported/Eigen/FFT>

namespace srpsbl {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void write_le(std::ostream& out, const void* data, std::size_t size) {
  // Host order is little-endian on every supported target.
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

}  // namespace

int StftOptions::hop() const {
  return std::max(1, static_cast<int>(std::lround(frame_length * (1.0 - overlap))));
}

VectorXd make_window(WindowKind kind, int length) {
  if (kind == WindowKind::Rectangular) return VectorXd::Ones(length);
  VectorXd w(length);
  for (int n = 0; n < length; ++n) {
    w(n) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  }
  return w;
}

Spectrogram stft(const MultichannelSignal& signal, const StftOptions& options) {
  if (!is_power_of_two(options.frame_length)) {
    throw ConfigError("STFT frame length must be a power of two");
  }
  if (!(options.overlap >= 0.0 && options.overlap < 1.0)) {
    throw ConfigError("STFT overlap must lie in [0, 1)");
  }
  if (signal.length() < options.frame_length) {
    throw ConfigError("signal is shorter than one STFT frame");
  }

  const int n_fft = options.frame_length;
  const int hop = options.hop();
  const int bins = n_fft / 2 + 1;
  const int frames = (signal.length() - n_fft) / hop + 1;
  const VectorXd window = make_window(options.window, n_fft);

  Spectrogram spec;
  spec.frame_length = n_fft;
  spec.hop = hop;
  spec.sample_rate = signal.sample_rate;
  spec.channels.assign(static_cast<std::size_t>(signal.channels()), MatrixXcd(bins, frames));

  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(n_fft));
  std::vector<cdouble> out;
  for (int m = 0; m < signal.channels(); ++m) {
    auto& dst = spec.channels[static_cast<std::size_t>(m)];
    for (int t = 0; t < frames; ++t) {
      for (int n = 0; n < n_fft; ++n) {
        frame[static_cast<std::size_t>(n)] = signal.samples(m, t * hop + n) * window(n);
      }
      fft.fwd(out, frame);
      for (int k = 0; k < bins; ++k) dst(k, t) = std::conj(out[static_cast<std::size_t>(k)]);
    }
  }
  return spec;
}

FrequencyBand make_band(double low_hz, double high_hz, double sample_rate, int fft_length,
                        int stride) {
  if (stride < 1) throw ConfigError("band stride must be at least 1");
  if (!(sample_rate > 0.0) || fft_length < 2) throw ConfigError("invalid band sampling setup");
  FrequencyBand band;
  band.sample_rate = sample_rate;
  band.fft_length = fft_length;
  const int k_max = fft_length / 2;
  int taken = 0;
  for (int k = 0; k <= k_max; ++k) {
    const double f = k * sample_rate / fft_length;
    if (f < low_hz || f > high_hz) continue;
    if (taken++ % stride == 0) band.bins.push_back(k);
  }
  if (band.bins.empty()) throw ConfigError("frequency band contains no STFT bins");
  return band;
}

void write_spectrogram_csv(std::ostream& out, const Spectrogram& spec) {
  out << "channel,bin,frame,real,imag\n";
  out.precision(17);
  for (int m = 0; m < spec.channel_count(); ++m) {
    const auto& ch = spec.channels[static_cast<std::size_t>(m)];
    for (int k = 0; k < ch.rows(); ++k) {
      for (int t = 0; t < ch.cols(); ++t) {
        out << m << ',' << k << ',' << t << ',' << ch(k, t).real() << ',' << ch(k, t).imag()
            << '\n';
      }
    }
  }
}

void write_spectrogram_binary(std::ostream& out, const Spectrogram& spec) {
  out.write("SRPSPEC1", 8);
  const std::uint32_t header[5] = {static_cast<std::uint32_t>(spec.channel_count()),
                                   static_cast<std::uint32_t>(spec.bin_count()),
                                   static_cast<std::uint32_t>(spec.frame_count()),
                                   static_cast<std::uint32_t>(spec.frame_length),
                                   static_cast<std::uint32_t>(spec.hop)};
  write_le(out, header, sizeof header);
  write_le(out, &spec.sample_rate, sizeof(double));
  for (const auto& ch : spec.channels) {
    for (int k = 0; k < ch.rows(); ++k) {
      for (int t = 0; t < ch.cols(); ++t) {
        const double re_im[2] = {ch(k, t).real(), ch(k, t).imag()};
        write_le(out, re_im, sizeof re_im);
      }
    }
  }
}

}  // namespace srpsbl
