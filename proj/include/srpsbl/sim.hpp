#ifndef SRPSBL_SIM_HPP
#define SRPSBL_SIM_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "srpsbl/geometry.hpp"
#include "srpsbl/wav.hpp"

namespace srpsbl {

enum class SignalKind {
  White,         // unit-variance Gaussian noise
  SpeechShaped,  // white noise, flat to 500 Hz then -6 dB/octave, unit variance
  Tone,          // cos(2 pi f t + phase), rendered analytically
  WavFile,       // first channel of a WAV file, resampled, truncated or padded
};

struct SignalSpec {
  SignalKind kind = SignalKind::SpeechShaped;
  double tone_hz = 1000.0;
  double tone_phase = 0.0;
  std::string wav_path;
};

struct SourceSpec {
  GridPoint doa;
  SignalSpec signal;
  double gain = 1.0;
};

/// Statistical reverberation: sparse echoes from random directions with an
/// exponential envelope reaching -60 dB at t60, scaled to a given
/// direct-to-reverberant energy ratio.
struct ReverbSpec {
  bool enabled = false;
  double t60 = 0.5;
  double echo_density = 4000.0;  // echoes per second
  double drr_db = 0.0;
  double first_echo = 0.005;     // seconds after the direct path
};

struct Scenario {
  MicArray array = uma16_array();
  std::vector<SourceSpec> sources;
  double duration = 1.0;
  double sample_rate = 48000.0;
  std::optional<double> snr_db = 20.0;  // nullopt disables noise
  ReverbSpec reverb;
  std::uint64_t seed = 1;
};

/// Rendered scenario split into its additive parts.
struct SynthesisComponents {
  MatrixXd direct;
  MatrixXd reverberant;
  MatrixXd noise;
  double sample_rate = 0.0;

  MultichannelSignal mixture() const;
};

/// Source waveform of `n_samples` samples. WAV sources shorter than that are
/// padded with silence (with a warning).
VectorXd generate_signal(const SignalSpec& spec, int n_samples, double sample_rate,
                         std::uint64_t seed);

/// 64-tap Blackman-windowed sinc interpolation of x at fractional index t.
double interpolate_sinc(const VectorXd& x, double t);

SynthesisComponents synthesize_components(const Scenario& scenario);

/// Far-field rendering referenced to the array centroid, plus optional
/// reverberation and white noise at snr_db relative to the summed
/// direct-path power. Identical scenarios give bit-identical output.
MultichannelSignal synthesize(const Scenario& scenario);

/// First `n_samples` of every channel.
MultichannelSignal truncate(const MultichannelSignal& signal, int n_samples);

}  // namespace srpsbl

#endif  // SRPSBL_SIM_HPP
