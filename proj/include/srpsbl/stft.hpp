#ifndef SRPSBL_STFT_HPP
#define SRPSBL_STFT_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "srpsbl/types.hpp"
#include "srpsbl/wav.hpp"

namespace srpsbl {

enum class WindowKind { Hann, Rectangular };

struct StftOptions {
  int frame_length = 1024;
  double overlap = 0.5;
  WindowKind window = WindowKind::Hann;

  int hop() const;
};

/// Complex STFT of an M-channel signal: one K x T matrix per channel,
/// K = frame_length/2 + 1 and T = floor((n - frame_length)/hop) + 1.
///
/// The analysis kernel is e^{+j 2 pi k n / N} (time-harmonic convention
/// e^{-j omega t}), so a plane wave arriving from direction u at microphone x
/// has spectrum proportional to e^{-j k u.x}, the far-field Green's function.
struct Spectrogram {
  std::vector<MatrixXcd> channels;
  int frame_length = 0;
  int hop = 0;
  double sample_rate = 0.0;

  int channel_count() const { return static_cast<int>(channels.size()); }
  int bin_count() const { return channels.empty() ? 0 : static_cast<int>(channels[0].rows()); }
  int frame_count() const { return channels.empty() ? 0 : static_cast<int>(channels[0].cols()); }
  double frequency(int bin) const { return bin * sample_rate / frame_length; }
};

/// Periodic window of the given length.
VectorXd make_window(WindowKind kind, int length);

/// Hann-windowed STFT. Tail samples that do not fill a frame are dropped.
Spectrogram stft(const MultichannelSignal& signal, const StftOptions& options = {});

/// Subset of one-sided STFT bins used downstream.
struct FrequencyBand {
  std::vector<int> bins;
  double sample_rate = 0.0;
  int fft_length = 0;

  int size() const { return static_cast<int>(bins.size()); }
  double frequency(int index) const {
    return bins[static_cast<std::size_t>(index)] * sample_rate / fft_length;
  }
};

/// Bins whose centre frequency lies in [low_hz, high_hz], keeping every
/// `stride`-th one starting from the lowest.
FrequencyBand make_band(double low_hz, double high_hz, double sample_rate, int fft_length,
                        int stride = 1);

/// CSV with columns channel,bin,frame,real,imag.
void write_spectrogram_csv(std::ostream& out, const Spectrogram& spec);

/// Little-endian binary dump: "SRPSPEC1", u32 channels, bins, frames,
/// frame_length, hop, f64 sample_rate, then (re, im) f64 pairs ordered by
/// channel, bin, frame.
void write_spectrogram_binary(std::ostream& out, const Spectrogram& spec);

}  // namespace srpsbl

#endif  // SRPSBL_STFT_HPP
