#include "srpsbl/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace srpsbl {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

// Same scale the reader divides by, clamped to the signed integer range.
std::int64_t quantize(double x, double full_scale) {
  return std::clamp<std::int64_t>(std::llround(std::clamp(x, -1.0, 1.0) * full_scale),
                                  static_cast<std::int64_t>(-full_scale),
                                  static_cast<std::int64_t>(full_scale) - 1);
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
}

struct FormatChunk {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const unsigned char* p, const FormatChunk& fmt) {
  if (fmt.tag == kFormatFloat) {
    float f;
    std::uint32_t u = read_u32(p);
    std::memcpy(&f, &u, sizeof f);
    return static_cast<double>(f);
  }
  switch (fmt.bits) {
    case 16: {
      const auto v = static_cast<std::int16_t>(read_u16(p));
      return v / 32768.0;
    }
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32: {
      const auto v = static_cast<std::int32_t>(read_u32(p));
      return v / 2147483648.0;
    }
    default:
      throw FormatError("unsupported PCM bit depth");
  }
}

}  // namespace

MultichannelSignal load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file '" + path + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("'" + path + "' is not a RIFF/WAVE file");
  }

  FormatChunk fmt;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* id = bytes.data() + pos;
    const std::size_t size = read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw IoError("truncated fmt chunk");
      fmt.tag = read_u16(bytes.data() + body);
      fmt.channels = read_u16(bytes.data() + body + 2);
      fmt.sample_rate = read_u32(bytes.data() + body + 4);
      fmt.bits = read_u16(bytes.data() + body + 14);
      if (fmt.tag == kFormatExtensible) {
        if (size < 40) throw FormatError("truncated WAVE_FORMAT_EXTENSIBLE header");
        // The sub-format GUID starts with the plain format tag.
        fmt.tag = read_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = std::min(size, bytes.size() - body);
      if (data_size < size) throw IoError("WAV data chunk is truncated");
      break;
    }
    pos = body + size + (size & 1U);
  }

  if (!have_fmt) throw FormatError("WAV file has no fmt chunk");
  if (data == nullptr) throw IoError("WAV file has no data chunk");
  if (fmt.channels == 0 || fmt.sample_rate == 0) throw FormatError("invalid WAV header");
  const bool pcm_ok = fmt.tag == kFormatPcm && (fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32);
  const bool float_ok = fmt.tag == kFormatFloat && fmt.bits == 32;
  if (!pcm_ok && !float_ok) {
    throw FormatError("unsupported WAV encoding (tag " + std::to_string(fmt.tag) + ", " +
                      std::to_string(fmt.bits) + " bits)");
  }

  const std::size_t frame_bytes = static_cast<std::size_t>(fmt.channels) * (fmt.bits / 8);
  const std::size_t n = data_size / frame_bytes;
  if (n == 0) throw FormatError("WAV data chunk is empty");

  MultichannelSignal sig;
  sig.sample_rate = fmt.sample_rate;
  sig.samples.resize(fmt.channels, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < fmt.channels; ++c) {
      sig.samples(c, static_cast<Eigen::Index>(i)) =
          decode_sample(data + i * frame_bytes + static_cast<std::size_t>(c) * (fmt.bits / 8), fmt);
    }
  }
  return sig;
}

void save_wav(const std::string& path, const MultichannelSignal& signal, WavEncoding encoding) {
  const int bits = encoding == WavEncoding::Pcm16 ? 16 : encoding == WavEncoding::Pcm24 ? 24 : 32;
  const auto channels = static_cast<std::uint16_t>(signal.channels());
  const auto n = static_cast<std::uint32_t>(signal.length());
  const std::uint32_t block = channels * static_cast<std::uint32_t>(bits / 8);
  const std::uint32_t data_size = block * n;
  const auto rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate));

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, encoding == WavEncoding::Float32 ? kFormatFloat : kFormatPcm);
  put_u16(out, channels);
  put_u32(out, rate);
  put_u32(out, rate * block);
  put_u16(out, static_cast<std::uint16_t>(block));
  put_u16(out, static_cast<std::uint16_t>(bits));
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_size);

  for (std::uint32_t i = 0; i < n; ++i) {
    for (int c = 0; c < channels; ++c) {
      const double x = signal.samples(c, i);
      switch (encoding) {
        case WavEncoding::Float32: {
          const float f = static_cast<float>(x);
          std::uint32_t u;
          std::memcpy(&u, &f, sizeof u);
          put_u32(out, u);
          break;
        }
        case WavEncoding::Pcm16: {
          const auto v = static_cast<std::int32_t>(quantize(x, 32768.0));
          put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
          break;
        }
        case WavEncoding::Pcm24: {
          const auto v = static_cast<std::int32_t>(quantize(x, 8388608.0));
          const auto u = static_cast<std::uint32_t>(v);
          out.push_back(static_cast<unsigned char>(u & 0xFF));
          out.push_back(static_cast<unsigned char>((u >> 8) & 0xFF));
          out.push_back(static_cast<unsigned char>((u >> 16) & 0xFF));
          break;
        }
        case WavEncoding::Pcm32: {
          put_u32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(quantize(x, 2147483648.0))));
          break;
        }
      }
    }
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write WAV file '" + path + "'");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing WAV file '" + path + "'");
}

}  // namespace srpsbl
