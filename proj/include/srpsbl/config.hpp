#ifndef SRPSBL_CONFIG_HPP
#define SRPSBL_CONFIG_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "srpsbl/dictionary.hpp"
#include "srpsbl/geometry.hpp"
#include "srpsbl/sim.hpp"
#include "srpsbl/stft.hpp"

namespace srpsbl {

/// Flat "section.key = value" document. '#' starts a comment line.
class KeyValueConfig {
 public:
  struct Entry {
    std::string value;
    int line = 0;  // 0 for values set programmatically
  };

  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>");
  static KeyValueConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, Entry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

 private:
  std::map<std::string, Entry> entries_;
  std::string source_ = "<config>";
};

enum class Method { SrpPhat, MsblDirect, SrpS, SrpSbl };
enum class InputKind { Scenario, Wav };
enum class SpectrogramDump { None, Csv, Binary };

const char* method_name(Method m);
Method parse_method(const std::string& name);

/// Fully resolved job configuration. Every field has a default, so an empty
/// document yields the bundled three-source scenario.
struct JobConfig {
  InputKind input = InputKind::Scenario;
  std::string wav_path;

  std::string geometry = "uma16";
  double sound_speed = kDefaultSoundSpeed;

  double coarse_elevation_step = 15.0;
  double coarse_azimuth_step = 10.0;
  double fine_elevation_step = 2.0;
  double fine_azimuth_step = 2.0;
  bool full_sphere = false;

  double band_low_hz = 300.0;
  double band_high_hz = 4000.0;
  int band_stride = 2;

  StftOptions stft;

  Method method = Method::SrpSbl;
  double threshold = 1e-3;
  int max_iterations = 200;
  int n_peaks = 3;
  double min_separation_deg = 3.0;
  double noise_fraction = 0.1;
  double prune_ratio = 1e-8;
  bool refit_noise = false;
  bool normalize_bins = false;
  bool trace = false;

  Propagation mode = Propagation::FarField;
  double nf_range = 2.0;
  std::string cache_dir;
  int materialize_mb = 512;

  std::string output_dir = "srpsbl_out";
  SpectrogramDump spectrogram_dump = SpectrogramDump::None;
  bool timing = false;

  std::uint64_t seed = 1;

  double sample_rate = 48000.0;
  double duration = 1.0;
  bool noise = true;
  double snr_db = 20.0;
  std::vector<GridPoint> sources = {make_grid_point(-6.0, 76.0), make_grid_point(6.0, 76.0),
                                    make_grid_point(20.0, 128.0)};
  SignalSpec signal;
  ReverbSpec reverb = {true, 0.5, 4000.0, 0.0, 0.005};

  std::vector<Method> compare_methods = {Method::SrpPhat, Method::MsblDirect, Method::SrpS,
                                         Method::SrpSbl};
  std::vector<double> compare_durations = {0.25, 0.5, 1.0, 2.0};
  int compare_trials = 5;
  int jobs = 1;
};

/// Applies a document on top of defaults. Unknown keys and malformed values
/// raise ConfigError naming the key and line.
JobConfig job_config_from(const KeyValueConfig& doc, JobConfig base = {});

/// Canonical key/value rendering of every field (defaults included).
std::map<std::string, std::string> to_key_values(const JobConfig& config);

GridSpec coarse_grid_spec(const JobConfig& config);
GridSpec fine_grid_spec(const JobConfig& config);
MicArray resolve_array(const JobConfig& config);
DictionaryOptions dictionary_options(const JobConfig& config);
Scenario scenario_from(const JobConfig& config, double duration, std::uint64_t seed);

}  // namespace srpsbl

#endif  // SRPSBL_CONFIG_HPP
