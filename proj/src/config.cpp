#include "srpsbl/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace srpsbl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

std::string signal_text(const SignalSpec& s) {
  switch (s.kind) {
    case SignalKind::White: return "white";
    case SignalKind::SpeechShaped: return "speech_shaped";
    case SignalKind::Tone: return "tone:" + fmt(s.tone_hz);
    case SignalKind::WavFile: return "wav:" + s.wav_path;
  }
  return "speech_shaped";
}

SignalSpec parse_signal(const std::string& v) {
  SignalSpec s;
  if (v == "white") {
    s.kind = SignalKind::White;
  } else if (v == "speech_shaped") {
    s.kind = SignalKind::SpeechShaped;
  } else if (v.rfind("tone:", 0) == 0) {
    s.kind = SignalKind::Tone;
    s.tone_hz = to_double(v.substr(5));
  } else if (v.rfind("wav:", 0) == 0 && v.size() > 4) {
    s.kind = SignalKind::WavFile;
    s.wav_path = v.substr(4);
  } else {
    throw ConfigError("unknown signal kind '" + v + "'");
  }
  return s;
}

std::vector<GridPoint> parse_sources(const std::string& v) {
  std::vector<GridPoint> out;
  for (const auto& item : split(v, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("source '" + item + "' must be elevation:azimuth");
    }
    const double el = to_double(trim(item.substr(0, colon)));
    const double az = to_double(trim(item.substr(colon + 1)));
    if (el < -90.0 || el > 90.0 || az < 0.0 || az > 360.0) {
      throw ConfigError("source '" + item + "' is outside the grid ranges");
    }
    out.push_back(make_grid_point(el, az));
  }
  return out;
}

using Setter = std::function<void(JobConfig&, const std::string&)>;
using Getter = std::function<std::string(const JobConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

template <typename T>
Field number_field(T JobConfig::*member) {
  return {[member](JobConfig& c, const std::string& v) {
            if constexpr (std::is_integral_v<T>) {
              c.*member = static_cast<T>(to_int(v));
            } else {
              c.*member = to_double(v);
            }
          },
          [member](const JobConfig& c) {
            if constexpr (std::is_integral_v<T>) {
              return std::to_string(c.*member);
            } else {
              return fmt(c.*member);
            }
          }};
}

Field bool_field(bool JobConfig::*member) {
  return {[member](JobConfig& c, const std::string& v) { c.*member = to_bool(v); },
          [member](const JobConfig& c) { return fmt(c.*member); }};
}

Field string_field(std::string JobConfig::*member) {
  return {[member](JobConfig& c, const std::string& v) { c.*member = v; },
          [member](const JobConfig& c) { return c.*member; }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["input.kind"] = {[](JobConfig& c, const std::string& v) {
                         if (v == "scenario") c.input = InputKind::Scenario;
                         else if (v == "wav") c.input = InputKind::Wav;
                         else throw ConfigError("input.kind must be scenario or wav");
                       },
                       [](const JobConfig& c) {
                         return std::string(c.input == InputKind::Wav ? "wav" : "scenario");
                       }};
    t["input.wav"] = string_field(&JobConfig::wav_path);
    t["array.geometry"] = string_field(&JobConfig::geometry);
    t["array.sound_speed"] = number_field(&JobConfig::sound_speed);
    t["grid.coarse.elevation_step"] = number_field(&JobConfig::coarse_elevation_step);
    t["grid.coarse.azimuth_step"] = number_field(&JobConfig::coarse_azimuth_step);
    t["grid.fine.elevation_step"] = number_field(&JobConfig::fine_elevation_step);
    t["grid.fine.azimuth_step"] = number_field(&JobConfig::fine_azimuth_step);
    t["grid.full_sphere"] = bool_field(&JobConfig::full_sphere);
    t["band.low_hz"] = number_field(&JobConfig::band_low_hz);
    t["band.high_hz"] = number_field(&JobConfig::band_high_hz);
    t["band.stride"] = number_field(&JobConfig::band_stride);
    t["stft.frame_length"] = {[](JobConfig& c, const std::string& v) { c.stft.frame_length = static_cast<int>(to_int(v)); },
                              [](const JobConfig& c) { return std::to_string(c.stft.frame_length); }};
    t["stft.overlap"] = {[](JobConfig& c, const std::string& v) { c.stft.overlap = to_double(v); },
                         [](const JobConfig& c) { return fmt(c.stft.overlap); }};
    t["stft.window"] = {[](JobConfig& c, const std::string& v) {
                          if (v == "hann") c.stft.window = WindowKind::Hann;
                          else if (v == "rectangular") c.stft.window = WindowKind::Rectangular;
                          else throw ConfigError("stft.window must be hann or rectangular");
                        },
                        [](const JobConfig& c) {
                          return std::string(c.stft.window == WindowKind::Hann ? "hann" : "rectangular");
                        }};
    t["method"] = {[](JobConfig& c, const std::string& v) { c.method = parse_method(v); },
                   [](const JobConfig& c) { return std::string(method_name(c.method)); }};
    t["solver.threshold"] = number_field(&JobConfig::threshold);
    t["solver.max_iterations"] = number_field(&JobConfig::max_iterations);
    t["solver.n_peaks"] = number_field(&JobConfig::n_peaks);
    t["solver.min_separation_deg"] = number_field(&JobConfig::min_separation_deg);
    t["solver.noise_fraction"] = number_field(&JobConfig::noise_fraction);
    t["solver.prune_ratio"] = number_field(&JobConfig::prune_ratio);
    t["solver.refit_noise"] = bool_field(&JobConfig::refit_noise);
    t["solver.normalize_bins"] = bool_field(&JobConfig::normalize_bins);
    t["solver.trace"] = bool_field(&JobConfig::trace);
    t["dictionary.mode"] = {[](JobConfig& c, const std::string& v) {
                              if (v == "ff") c.mode = Propagation::FarField;
                              else if (v == "nf") c.mode = Propagation::NearField;
                              else throw ConfigError("dictionary.mode must be ff or nf");
                            },
                            [](const JobConfig& c) {
                              return std::string(c.mode == Propagation::FarField ? "ff" : "nf");
                            }};
    t["dictionary.nf_range"] = number_field(&JobConfig::nf_range);
    t["dictionary.cache_dir"] = string_field(&JobConfig::cache_dir);
    t["dictionary.materialize_mb"] = number_field(&JobConfig::materialize_mb);
    t["output.dir"] = string_field(&JobConfig::output_dir);
    t["output.spectrogram"] = {[](JobConfig& c, const std::string& v) {
                                 if (v == "none") c.spectrogram_dump = SpectrogramDump::None;
                                 else if (v == "csv") c.spectrogram_dump = SpectrogramDump::Csv;
                                 else if (v == "binary") c.spectrogram_dump = SpectrogramDump::Binary;
                                 else throw ConfigError("output.spectrogram must be none, csv or binary");
                               },
                               [](const JobConfig& c) {
                                 switch (c.spectrogram_dump) {
                                   case SpectrogramDump::Csv: return std::string("csv");
                                   case SpectrogramDump::Binary: return std::string("binary");
                                   default: return std::string("none");
                                 }
                               }};
    t["output.timing"] = bool_field(&JobConfig::timing);
    t["seed"] = {[](JobConfig& c, const std::string& v) {
                   const long long s = to_int(v);
                   if (s < 0) throw ConfigError("seed must be non-negative");
                   c.seed = static_cast<std::uint64_t>(s);
                 },
                 [](const JobConfig& c) { return std::to_string(c.seed); }};
    t["scenario.sample_rate"] = number_field(&JobConfig::sample_rate);
    t["scenario.duration"] = number_field(&JobConfig::duration);
    t["scenario.snr_db"] = {[](JobConfig& c, const std::string& v) {
                              if (v == "none") {
                                c.noise = false;
                              } else {
                                c.noise = true;
                                c.snr_db = to_double(v);
                              }
                            },
                            [](const JobConfig& c) { return c.noise ? fmt(c.snr_db) : std::string("none"); }};
    t["scenario.sources"] = {[](JobConfig& c, const std::string& v) { c.sources = parse_sources(v); },
                             [](const JobConfig& c) {
                               std::string s;
                               for (const auto& p : c.sources) {
                                 if (!s.empty()) s += ", ";
                                 s += fmt(p.elevation_deg) + ":" + fmt(p.azimuth_deg);
                               }
                               return s;
                             }};
    t["scenario.signal"] = {[](JobConfig& c, const std::string& v) { c.signal = parse_signal(v); },
                            [](const JobConfig& c) { return signal_text(c.signal); }};
    t["scenario.reverb"] = {[](JobConfig& c, const std::string& v) {
                              if (v == "none") c.reverb.enabled = false;
                              else if (v == "exponential") c.reverb.enabled = true;
                              else throw ConfigError("scenario.reverb must be none or exponential");
                            },
                            [](const JobConfig& c) {
                              return std::string(c.reverb.enabled ? "exponential" : "none");
                            }};
    t["scenario.t60"] = {[](JobConfig& c, const std::string& v) { c.reverb.t60 = to_double(v); },
                         [](const JobConfig& c) { return fmt(c.reverb.t60); }};
    t["scenario.echo_density"] = {[](JobConfig& c, const std::string& v) { c.reverb.echo_density = to_double(v); },
                                  [](const JobConfig& c) { return fmt(c.reverb.echo_density); }};
    t["scenario.drr_db"] = {[](JobConfig& c, const std::string& v) { c.reverb.drr_db = to_double(v); },
                            [](const JobConfig& c) { return fmt(c.reverb.drr_db); }};
    t["compare.methods"] = {[](JobConfig& c, const std::string& v) {
                              c.compare_methods.clear();
                              for (const auto& m : split(v, ',')) c.compare_methods.push_back(parse_method(m));
                              if (c.compare_methods.empty()) throw ConfigError("compare.methods is empty");
                            },
                            [](const JobConfig& c) {
                              std::string s;
                              for (auto m : c.compare_methods) {
                                if (!s.empty()) s += ", ";
                                s += method_name(m);
                              }
                              return s;
                            }};
    t["compare.durations"] = {[](JobConfig& c, const std::string& v) {
                                c.compare_durations.clear();
                                for (const auto& d : split(v, ',')) c.compare_durations.push_back(to_double(d));
                                if (c.compare_durations.empty()) throw ConfigError("compare.durations is empty");
                              },
                              [](const JobConfig& c) {
                                std::string s;
                                for (double d : c.compare_durations) {
                                  if (!s.empty()) s += ", ";
                                  s += fmt(d);
                                }
                                return s;
                              }};
    t["compare.trials"] = number_field(&JobConfig::compare_trials);
    t["compare.jobs"] = number_field(&JobConfig::jobs);
    return t;
  }();
  return table;
}

void validate(const JobConfig& c) {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(std::string(key) + ": " + what);
  };
  require(c.input != InputKind::Wav || !c.wav_path.empty(), "input.wav", "a WAV path is required when input.kind = wav");
  require(c.sound_speed > 0.0, "array.sound_speed", "must be positive");
  require(c.band_low_hz >= 0.0 && c.band_high_hz > c.band_low_hz, "band.high_hz", "must exceed band.low_hz");
  require(c.band_stride >= 1, "band.stride", "must be at least 1");
  require(c.threshold > 0.0, "solver.threshold", "must be positive");
  require(c.max_iterations >= 1, "solver.max_iterations", "must be at least 1");
  require(c.n_peaks >= 1, "solver.n_peaks", "must be at least 1");
  require(c.min_separation_deg >= 0.0, "solver.min_separation_deg", "must be non-negative");
  require(c.noise_fraction > 0.0, "solver.noise_fraction", "must be positive");
  require(c.prune_ratio >= 0.0 && c.prune_ratio < 1.0, "solver.prune_ratio", "must lie in [0, 1)");
  require(c.nf_range > 0.0, "dictionary.nf_range", "must be positive");
  require(c.materialize_mb >= 0, "dictionary.materialize_mb", "must be non-negative");
  require(!c.output_dir.empty(), "output.dir", "must not be empty");
  require(c.sample_rate > 0.0, "scenario.sample_rate", "must be positive");
  require(c.duration > 0.0, "scenario.duration", "must be positive");
  require(!c.sources.empty(), "scenario.sources", "at least one source is required");
  require(!c.reverb.enabled || c.reverb.t60 > 0.0, "scenario.t60", "must be positive when reverberation is enabled");
  require(c.reverb.echo_density >= 0.0, "scenario.echo_density", "must be non-negative");
  require(c.compare_trials >= 1, "compare.trials", "must be at least 1");
  require(c.jobs >= 1, "compare.jobs", "must be at least 1");
  for (double d : c.compare_durations) require(d > 0.0, "compare.durations", "durations must be positive");
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig cfg;
  cfg.source_ = source;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.entries_.count(key)) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    cfg.entries_[key] = {trim(t.substr(eq + 1)), lineno};
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in, path);
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  entries_[trim(key)] = {trim(value), 0};
}

const char* method_name(Method m) {
  switch (m) {
    case Method::SrpPhat: return "srp_phat";
    case Method::MsblDirect: return "msbl_direct";
    case Method::SrpS: return "srp_s";
    case Method::SrpSbl: return "srp_sbl";
  }
  return "srp_sbl";
}

Method parse_method(const std::string& name) {
  if (name == "srp_phat") return Method::SrpPhat;
  if (name == "msbl_direct") return Method::MsblDirect;
  if (name == "srp_s") return Method::SrpS;
  if (name == "srp_sbl") return Method::SrpSbl;
  throw ConfigError("unknown method '" + name + "'");
}

JobConfig job_config_from(const KeyValueConfig& doc, JobConfig base) {
  const auto& table = fields();
  for (const auto& [key, entry] : doc.entries()) {
    const std::string where =
        entry.line > 0 ? doc.source() + ":" + std::to_string(entry.line) + ": " : std::string();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    try {
      it->second.set(base, entry.value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  validate(base);
  return base;
}

std::map<std::string, std::string> to_key_values(const JobConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields()) out[key] = field.get(config);
  return out;
}

GridSpec coarse_grid_spec(const JobConfig& c) {
  GridSpec s;
  s.elevation_step = c.coarse_elevation_step;
  s.azimuth_step = c.coarse_azimuth_step;
  if (c.full_sphere) s.azimuth_max = 360.0 - c.coarse_azimuth_step;
  return s;
}

GridSpec fine_grid_spec(const JobConfig& c) {
  GridSpec s;
  s.elevation_step = c.fine_elevation_step;
  s.azimuth_step = c.fine_azimuth_step;
  if (c.full_sphere) s.azimuth_max = 360.0 - c.fine_azimuth_step;
  return s;
}

MicArray resolve_array(const JobConfig& c) {
  if (c.geometry == "uma16") return uma16_array(c.sound_speed);
  return load_array_geometry(c.geometry, c.sound_speed);
}

DictionaryOptions dictionary_options(const JobConfig& c) {
  DictionaryOptions o;
  o.mode = c.mode;
  o.near_field_range = c.nf_range;
  o.materialize_limit_bytes = static_cast<std::size_t>(c.materialize_mb) << 20;
  return o;
}

Scenario scenario_from(const JobConfig& c, double duration, std::uint64_t seed) {
  Scenario s{resolve_array(c), {}, duration, c.sample_rate, std::nullopt, c.reverb, seed};
  if (c.noise) s.snr_db = c.snr_db;
  for (const auto& p : c.sources) s.sources.push_back({p, c.signal, 1.0});
  return s;
}

}  // namespace srpsbl
