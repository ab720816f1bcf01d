#ifndef SRPSBL_WAV_HPP
#define SRPSBL_WAV_HPP

#include <string>

#include "srpsbl/types.hpp"

namespace srpsbl {

/// Real multichannel recording, one channel per row.
struct MultichannelSignal {
  MatrixXd samples;  // M x n_samples
  double sample_rate = 48000.0;

  int channels() const { return static_cast<int>(samples.rows()); }
  int length() const { return static_cast<int>(samples.cols()); }
};

enum class WavEncoding { Pcm16, Pcm24, Pcm32, Float32 };

/// Reads a RIFF/WAVE file (PCM 16/24/32-bit, 32-bit float, plain or
/// WAVE_FORMAT_EXTENSIBLE) and normalizes integer samples to [-1, 1].
MultichannelSignal load_wav(const std::string& path);

/// Writes a RIFF/WAVE file. Integer encodings clip to [-1, 1].
void save_wav(const std::string& path, const MultichannelSignal& signal,
              WavEncoding encoding = WavEncoding::Float32);

}  // namespace srpsbl

#endif  // SRPSBL_WAV_HPP
