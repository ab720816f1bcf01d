#include "srpsbl/sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/FFT>

#include "srpsbl/log.hpp"

namespace srpsbl {

namespace {

constexpr int kHalfTaps = 32;  // 64-tap interpolator

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix(splitmix(seed) ^ splitmix(stream + 0x5851F42D4C957F2DULL));
}

double sinc_kernel(double z) {
  if (std::abs(z) >= kHalfTaps) return 0.0;
  const double pz = std::numbers::pi * z;
  const double sinc = z == 0.0 ? 1.0 : std::sin(pz) / pz;
  const double w = 0.42 + 0.5 * std::cos(pz / kHalfTaps) + 0.08 * std::cos(2.0 * pz / kHalfTaps);
  return sinc * w;
}

/// Taps for a fixed fractional offset mu in [0, 1): y = sum_j taps[j] x[base + j - 31].
std::array<double, 2 * kHalfTaps> fractional_taps(double mu) {
  std::array<double, 2 * kHalfTaps> taps{};
  for (int j = -kHalfTaps + 1; j <= kHalfTaps; ++j) {
    taps[static_cast<std::size_t>(j + kHalfTaps - 1)] = mu == 0.0 ? (j == 0 ? 1.0 : 0.0) : sinc_kernel(mu - j);
  }
  return taps;
}

/// y[n] = x(n + offset - delay) for n in [0, count).
VectorXd render_delayed(const VectorXd& x, int offset, double delay, int count) {
  VectorXd y(count);
  const double start = offset - delay;
  const double base0 = std::floor(start);
  const double mu = start - base0;
  const auto taps = fractional_taps(mu);
  const auto base = static_cast<long>(base0);
  for (int n = 0; n < count; ++n) {
    double acc = 0.0;
    for (int j = -kHalfTaps + 1; j <= kHalfTaps; ++j) {
      const long idx = base + n + j;
      if (idx >= 0 && idx < x.size()) acc += taps[static_cast<std::size_t>(j + kHalfTaps - 1)] * x(idx);
    }
    y(n) = acc;
  }
  return y;
}

/// Adds amplitude * delta(t - position) to h using the interpolation kernel.
void add_fractional_impulse(VectorXd& h, double position, double amplitude) {
  const double base0 = std::floor(position);
  const double mu = position - base0;
  const auto base = static_cast<long>(base0);
  for (int j = -kHalfTaps + 1; j <= kHalfTaps; ++j) {
    const long idx = base + j;
    if (idx >= 0 && idx < h.size()) h(idx) += amplitude * sinc_kernel(static_cast<double>(j) - mu);
  }
}

int next_pow2(long n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

VectorXd shape_speech(const VectorXd& white, double sample_rate) {
  const int n_fft = next_pow2(white.size());
  std::vector<double> buf(static_cast<std::size_t>(n_fft), 0.0);
  std::copy(white.data(), white.data() + white.size(), buf.begin());
  Eigen::FFT<double> fft;
  std::vector<cdouble> spec;
  fft.fwd(spec, buf);
  for (int k = 0; k < n_fft; ++k) {
    const int kk = std::min(k, n_fft - k);
    const double f = kk * sample_rate / n_fft;
    if (f > 500.0) spec[static_cast<std::size_t>(k)] *= 500.0 / f;
  }
  fft.inv(buf, spec);
  VectorXd out = Eigen::Map<VectorXd>(buf.data(), white.size());
  const double rms = std::sqrt(out.squaredNorm() / static_cast<double>(out.size()));
  return rms > 0.0 ? VectorXd(out / rms) : out;
}

VectorXd load_wav_source(const std::string& path, int n_samples, double sample_rate) {
  const MultichannelSignal wav = load_wav(path);
  const VectorXd first = wav.samples.row(0).transpose();
  VectorXd src;
  if (wav.sample_rate == sample_rate) {
    src = first;
  } else {
    const double ratio = wav.sample_rate / sample_rate;
    const auto len = static_cast<int>(std::floor((first.size() - 1) / ratio)) + 1;
    src.resize(len);
    for (int i = 0; i < len; ++i) src(i) = interpolate_sinc(first, i * ratio);
  }
  VectorXd out = VectorXd::Zero(n_samples);
  const auto copy = std::min<Eigen::Index>(src.size(), n_samples);
  out.head(copy) = src.head(copy);
  if (copy < n_samples) warn("WAV source '" + path + "' is shorter than requested; padding with silence");
  return out;
}

struct Echo {
  double time;
  Vec3 direction;
  double amplitude;
};

std::vector<Echo> draw_echoes(const ReverbSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(spec.first_echo, spec.t60);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto count = static_cast<int>(std::lround(spec.echo_density * (spec.t60 - spec.first_echo)));
  std::vector<Echo> echoes;
  echoes.reserve(static_cast<std::size_t>(std::max(count, 0)));
  double energy = 0.0;
  for (int e = 0; e < count; ++e) {
    Echo echo;
    echo.time = uniform(rng);
    Vec3 dir(normal(rng), normal(rng), normal(rng));
    const double norm = dir.norm();
    echo.direction = norm > 0.0 ? Vec3(dir / norm) : Vec3::UnitZ();
    echo.amplitude = normal(rng) * std::pow(10.0, -3.0 * echo.time / spec.t60);
    energy += echo.amplitude * echo.amplitude;
    echoes.push_back(echo);
  }
  if (energy > 0.0) {
    const double scale = std::sqrt(std::pow(10.0, -spec.drr_db / 10.0) / energy);
    for (auto& e : echoes) e.amplitude *= scale;
  }
  return echoes;
}

/// Linear convolution of x with h, returning samples [from, from + count).
VectorXd convolve_segment(const std::vector<cdouble>& x_spec, int n_fft, const VectorXd& h,
                          int from, int count, Eigen::FFT<double>& fft) {
  std::vector<double> hb(static_cast<std::size_t>(n_fft), 0.0);
  std::copy(h.data(), h.data() + h.size(), hb.begin());
  std::vector<cdouble> h_spec;
  fft.fwd(h_spec, hb);
  for (std::size_t i = 0; i < h_spec.size(); ++i) h_spec[i] *= x_spec[i];
  std::vector<double> y;
  fft.inv(y, h_spec);
  return Eigen::Map<VectorXd>(y.data() + from, count);
}

void validate(const Scenario& s) {
  if (!(s.duration > 0.0)) throw ConfigError("scenario duration must be positive");
  if (!(s.sample_rate > 0.0)) throw ConfigError("scenario sample rate must be positive");
  if (s.reverb.enabled) {
    if (!(s.reverb.t60 > 0.0)) throw ConfigError("reverberation t60 must be positive");
    if (!(s.reverb.echo_density >= 0.0)) throw ConfigError("echo density must be non-negative");
    if (!(s.reverb.first_echo >= 0.0) || s.reverb.first_echo >= s.reverb.t60) {
      throw ConfigError("first echo must precede t60");
    }
  }
  for (const auto& src : s.sources) {
    if (src.doa.elevation_deg < -90.0 || src.doa.elevation_deg > 90.0 ||
        src.doa.azimuth_deg < 0.0 || src.doa.azimuth_deg > 360.0) {
      throw ConfigError("source direction outside the grid ranges");
    }
  }
}

}  // namespace

double interpolate_sinc(const VectorXd& x, double t) {
  const double base0 = std::floor(t);
  const double mu = t - base0;
  const auto base = static_cast<long>(base0);
  if (mu == 0.0) return (base >= 0 && base < x.size()) ? x(base) : 0.0;
  double acc = 0.0;
  for (int j = -kHalfTaps + 1; j <= kHalfTaps; ++j) {
    const long idx = base + j;
    if (idx >= 0 && idx < x.size()) acc += x(idx) * sinc_kernel(mu - j);
  }
  return acc;
}

VectorXd generate_signal(const SignalSpec& spec, int n_samples, double sample_rate,
                         std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("signal duration must be positive");
  switch (spec.kind) {
    case SignalKind::White:
    case SignalKind::SpeechShaped: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      VectorXd white(n_samples);
      for (int i = 0; i < n_samples; ++i) white(i) = normal(rng);
      return spec.kind == SignalKind::White ? white : shape_speech(white, sample_rate);
    }
    case SignalKind::Tone: {
      VectorXd tone(n_samples);
      const double w = 2.0 * std::numbers::pi * spec.tone_hz / sample_rate;
      for (int i = 0; i < n_samples; ++i) tone(i) = std::cos(w * i + spec.tone_phase);
      return tone;
    }
    case SignalKind::WavFile:
      return load_wav_source(spec.wav_path, n_samples, sample_rate);
  }
  return VectorXd::Zero(n_samples);
}

MultichannelSignal SynthesisComponents::mixture() const {
  MultichannelSignal s;
  s.samples = direct + reverberant + noise;
  s.sample_rate = sample_rate;
  return s;
}

SynthesisComponents synthesize_components(const Scenario& scenario) {
  validate(scenario);
  const MicArray& array = scenario.array;
  const double fs = scenario.sample_rate;
  const int mics = array.size();
  const auto n = static_cast<int>(std::lround(scenario.duration * fs));
  if (n < 1) throw ConfigError("scenario is shorter than one sample");
  const Vec3 centroid = array.centroid();

  double max_offset = 0.0;
  for (int m = 0; m < mics; ++m) {
    max_offset = std::max(max_offset, (array.position(m) - centroid).norm() / array.sound_speed());
  }
  const int pad = static_cast<int>(std::ceil(max_offset * fs)) + kHalfTaps + 8;
  const int ir_length = scenario.reverb.enabled
                            ? static_cast<int>(std::ceil(scenario.reverb.t60 * fs)) + 2 * pad
                            : 0;

  SynthesisComponents out;
  out.sample_rate = fs;
  out.direct = MatrixXd::Zero(mics, n);
  out.reverberant = MatrixXd::Zero(mics, n);
  out.noise = MatrixXd::Zero(mics, n);

  Eigen::FFT<double> fft;
  for (std::size_t j = 0; j < scenario.sources.size(); ++j) {
    const auto& src = scenario.sources[j];
    const int left = pad + ir_length;
    const int ext = left + n + pad;
    SignalSpec spec = src.signal;
    if (spec.kind == SignalKind::Tone) {
      // Shift the phase so the recording window starts at t = 0.
      spec.tone_phase -= 2.0 * std::numbers::pi * spec.tone_hz * left / fs;
    }
    const VectorXd s = src.gain * generate_signal(spec, ext, fs, stream_seed(scenario.seed, 1000 + j));

    for (int m = 0; m < mics; ++m) {
      const double arrival = -src.doa.unit.dot(array.position(m) - centroid) / array.sound_speed();
      if (src.signal.kind == SignalKind::Tone) {
        const double w = 2.0 * std::numbers::pi * src.signal.tone_hz;
        for (int i = 0; i < n; ++i) {
          out.direct(m, i) += src.gain * std::cos(w * (i / fs - arrival) + src.signal.tone_phase);
        }
      } else {
        out.direct.row(m) += render_delayed(s, left, arrival * fs, n).transpose();
      }
    }

    if (!scenario.reverb.enabled) continue;
    const auto echoes = draw_echoes(scenario.reverb, stream_seed(scenario.seed, 2000 + j));
    const int seg_len = n + ir_length;
    const int n_fft = next_pow2(static_cast<long>(seg_len) + ir_length);
    std::vector<double> seg(static_cast<std::size_t>(n_fft), 0.0);
    std::copy(s.data() + (left - ir_length), s.data() + (left + n), seg.begin());
    std::vector<cdouble> seg_spec;
    fft.fwd(seg_spec, seg);
    for (int m = 0; m < mics; ++m) {
      VectorXd h = VectorXd::Zero(ir_length);
      for (const auto& e : echoes) {
        const double arrival =
            e.time - e.direction.dot(array.position(m) - centroid) / array.sound_speed();
        add_fractional_impulse(h, arrival * fs, e.amplitude);
      }
      out.reverberant.row(m) += convolve_segment(seg_spec, n_fft, h, ir_length, n, fft).transpose();
    }
  }

  if (scenario.snr_db) {
    const double direct_power = out.direct.squaredNorm() / (static_cast<double>(mics) * n);
    const double sigma = std::sqrt(direct_power / std::pow(10.0, *scenario.snr_db / 10.0));
    std::mt19937_64 rng(stream_seed(scenario.seed, 3000));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int m = 0; m < mics; ++m) {
      for (int i = 0; i < n; ++i) out.noise(m, i) = sigma * normal(rng);
    }
  }
  return out;
}

MultichannelSignal synthesize(const Scenario& scenario) {
  return synthesize_components(scenario).mixture();
}

MultichannelSignal truncate(const MultichannelSignal& signal, int n_samples) {
  if (n_samples < 1 || n_samples > signal.length()) {
    throw ConfigError("truncation length outside the signal");
  }
  MultichannelSignal out;
  out.sample_rate = signal.sample_rate;
  out.samples = signal.samples.leftCols(n_samples);
  return out;
}

}  // namespace srpsbl
