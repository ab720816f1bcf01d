#include "srpsbl/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "srpsbl/log.hpp"
#include "srpsbl/sim.hpp"
#include "srpsbl/somp.hpp"
#include "srpsbl/wav.hpp"

namespace srpsbl {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kTraceTopGamma = 5;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

fs::path prepare_output_dir(const JobConfig& config) {
  fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

TraceRow trace_row(const MsblState& state) {
  TraceRow row{state.iteration, state.last_relative_change, {}};
  std::vector<int> order(static_cast<std::size_t>(state.gamma.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  const auto top = std::min<std::size_t>(kTraceTopGamma, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](int a, int b) {
                      return state.gamma(a) > state.gamma(b) ||
                             (state.gamma(a) == state.gamma(b) && a < b);
                    });
  for (std::size_t i = 0; i < top; ++i) row.top_gamma.emplace_back(order[i], state.gamma(order[i]));
  return row;
}

json estimates_json(const PeakSelection& peaks) {
  json out = json::array();
  for (const auto& e : peaks.estimates) {
    out.push_back({{"rank", e.rank},
                   {"elevation_deg", e.elevation_deg},
                   {"azimuth_deg", e.azimuth_deg},
                   {"score", number_or_null(e.score)},
                   {"grid_index", e.grid_index}});
  }
  return out;
}

json sources_json(const std::vector<GridPoint>& points) {
  json out = json::array();
  for (const auto& p : points) {
    out.push_back({{"elevation_deg", p.elevation_deg}, {"azimuth_deg", p.azimuth_deg}});
  }
  return out;
}

json config_json(const JobConfig& config) {
  json out = json::object();
  for (const auto& [key, value] : to_key_values(config)) out[key] = value;
  return out;
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream out;
  out << "iteration,relative_change";
  for (int i = 1; i <= kTraceTopGamma; ++i) out << ",index_" << i << ",gamma_" << i;
  out << '\n';
  for (const auto& row : rows) {
    out << row.iteration << ',' << fmt(row.relative_change);
    for (int i = 0; i < kTraceTopGamma; ++i) {
      if (static_cast<std::size_t>(i) < row.top_gamma.size()) {
        out << ',' << row.top_gamma[static_cast<std::size_t>(i)].first << ','
            << fmt(row.top_gamma[static_cast<std::size_t>(i)].second);
      } else {
        out << ",,";
      }
    }
    out << '\n';
  }
  return out.str();
}

double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> finite_sorted(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  std::sort(values.begin(), values.end());
  return values;
}

MultichannelSignal load_input(const JobConfig& config, std::vector<GridPoint>* truths) {
  if (config.input == InputKind::Wav) {
    if (config.wav_path.empty()) throw ConfigError("input.wav: a WAV path is required");
    try {
      return load_wav(config.wav_path);
    } catch (const IoError& e) {
      throw IoError(std::string("input.wav: ") + e.what());
    } catch (const FormatError& e) {
      throw FormatError(std::string("input.wav: ") + e.what());
    }
  }
  if (truths) *truths = config.sources;
  return synthesize(scenario_from(config, config.duration, config.seed));
}

}  // namespace

Localizer::Localizer(JobConfig config)
    : config_(std::move(config)),
      array_(resolve_array(config_)),
      coarse_(build_doa_grid(coarse_grid_spec(config_))),
      fine_(build_doa_grid(fine_grid_spec(config_))) {}

FrequencyBand Localizer::band(double sample_rate) const {
  return make_band(config_.band_low_hz, config_.band_high_hz, sample_rate,
                   config_.stft.frame_length, config_.band_stride);
}

std::shared_ptr<const DictionarySet> Localizer::dictionary(double sample_rate) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& slot = dictionaries_[sample_rate];
  if (!slot) {
    slot = std::make_shared<const DictionarySet>(
        build_dictionary_cached(array_, coarse_, fine_, band(sample_rate),
                                dictionary_options(config_), config_.cache_dir));
  }
  return slot;
}

MsblOptions Localizer::solver_options() const {
  MsblOptions o;
  o.convergence_threshold = config_.threshold;
  o.max_iterations = config_.max_iterations;
  o.prune_ratio = config_.prune_ratio;
  o.noise_fraction = config_.noise_fraction;
  o.refit_noise = config_.refit_noise;
  o.normalize_bins = config_.normalize_bins;
  return o;
}

LocalizationResult Localizer::run(const MultichannelSignal& signal, Method method) const {
  if (signal.channels() != array_.size()) {
    throw ConfigError("input has " + std::to_string(signal.channels()) + " channels but the array has " +
                      std::to_string(array_.size()) + " microphones");
  }
  const auto start = std::chrono::steady_clock::now();
  LocalizationResult result = run(stft(signal, config_.stft), method);
  result.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

LocalizationResult Localizer::run(const Spectrogram& spec, Method method) const {
  const auto start = std::chrono::steady_clock::now();
  LocalizationResult result;
  result.method = method;
  const FrequencyBand fb = band(spec.sample_rate);
  if (fb.bins.empty()) throw ConfigError("band.low_hz/band.high_hz select no STFT bins");

  std::vector<TraceRow> rows;
  MsblOptions options = solver_options();
  if (config_.trace) {
    options.observer = [&rows](const MsblState& s) { rows.push_back(trace_row(s)); };
  }

  if (method == Method::MsblDirect) {
    SparseMap map = msbl_direct_solve(spec, array_, fine_, fb, dictionary_options(config_), options);
    result.map = map.weights;
    result.solver_tag = map.solver_tag;
    result.iterations = map.iterations;
    result.converged = map.converged;
    result.peaks = pick_peaks(result.map, fine_, config_.n_peaks, config_.min_separation_deg);
  } else {
    const WhitenedCrossSpectra cross = whiten(spec, array_.pairs(), fb);
    const SrpTensor tensor = srp_tensor(cross, coarse_, array_);
    if (method == Method::SrpPhat) {
      result.coarse = true;
      result.map = averaged_map(tensor);
      result.solver_tag = "srp_phat";
      result.peaks = srp_phat_localize(tensor, config_.n_peaks, config_.min_separation_deg);
    } else {
      const auto dict = dictionary(spec.sample_rate);
      SparseMap map;
      if (method == Method::SrpS) {
        const MatrixXd data = averaged_map(tensor);
        map = somp_solve(data, dict->band_average, config_.n_peaks);
      } else {
        map = msbl_solve(tensor, *dict, options);
      }
      result.map = map.weights;
      result.solver_tag = map.solver_tag;
      result.iterations = map.iterations;
      result.converged = map.converged;
      result.peaks = pick_peaks(result.map, fine_, config_.n_peaks, config_.min_separation_deg);
    }
  }
  result.trace = std::move(rows);
  result.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string report_json(const JobConfig& config, const LocalizationResult& result,
                        const std::vector<GridPoint>* truths) {
  json report;
  report["method"] = method_name(result.method);
  report["solver_tag"] = result.solver_tag;
  report["estimates"] = estimates_json(result.peaks);
  report["shortfall"] = result.peaks.shortfall;
  report["iterations"] = result.iterations;
  report["converged"] = result.converged;
  if (truths) {
    report["truths"] = sources_json(*truths);
    const LocalizationError le = localization_error(result.peaks.estimates, *truths);
    report["localization_error_deg"] = le.degrees;
  }
  if (config.timing) report["runtime_ms"] = result.runtime_ms;
  report["config"] = config_json(config);
  return report.dump(2) + "\n";
}

double median_of(std::vector<double> values) { return quantile(finite_sorted(std::move(values)), 0.5); }

double iqr_of(std::vector<double> values) {
  const auto sorted = finite_sorted(std::move(values));
  return quantile(sorted, 0.75) - quantile(sorted, 0.25);
}

CompareTable run_compare(const JobConfig& config) {
  const int trials = config.compare_trials;
  if (trials < 1) throw ConfigError("compare.trials must be at least 1");
  if (config.compare_methods.empty() || config.compare_durations.empty()) {
    throw ConfigError("compare needs at least one method and one duration");
  }
  const Localizer localizer(config);
  const double longest =
      *std::max_element(config.compare_durations.begin(), config.compare_durations.end());

  const std::size_t n_methods = config.compare_methods.size();
  const std::size_t n_durations = config.compare_durations.size();
  // errors[trial][duration][method]
  std::vector<std::vector<std::vector<double>>> errors(
      static_cast<std::size_t>(trials),
      std::vector<std::vector<double>>(n_durations, std::vector<double>(n_methods, 0.0)));

  auto run_trial = [&](int t) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(t);
    MultichannelSignal full;
    bool synthesized = true;
    try {
      full = synthesize(scenario_from(config, longest, seed));
    } catch (const std::exception& e) {
      warn("trial " + std::to_string(t) + ": synthesis failed: " + e.what());
      synthesized = false;
    }
    for (std::size_t d = 0; d < n_durations; ++d) {
      for (std::size_t m = 0; m < n_methods; ++m) {
        double& cell = errors[static_cast<std::size_t>(t)][d][m];
        cell = std::numeric_limits<double>::quiet_NaN();
        if (!synthesized) continue;
        try {
          const int n = static_cast<int>(std::lround(config.compare_durations[d] * full.sample_rate));
          const auto result = localizer.run(truncate(full, n), config.compare_methods[m]);
          cell = localization_error(result.peaks.estimates, config.sources).degrees;
        } catch (const std::exception& e) {
          warn("trial " + std::to_string(t) + ", " + method_name(config.compare_methods[m]) +
               ", " + fmt(config.compare_durations[d]) + " s: " + e.what());
        }
      }
    }
  };

  const int jobs = std::max(1, std::min(config.jobs, trials));
  if (jobs == 1) {
    for (int t = 0; t < trials; ++t) run_trial(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) {
      pool.emplace_back([&] {
        for (int t = next++; t < trials; t = next++) run_trial(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  CompareTable table;
  for (int t = 0; t < trials; ++t) table.seeds.push_back(config.seed + static_cast<std::uint64_t>(t));
  for (std::size_t m = 0; m < n_methods; ++m) {
    for (std::size_t d = 0; d < n_durations; ++d) {
      CompareCell cell;
      cell.method = config.compare_methods[m];
      cell.duration = config.compare_durations[d];
      for (int t = 0; t < trials; ++t) {
        const double e = errors[static_cast<std::size_t>(t)][d][m];
        cell.errors.push_back(e);
        if (std::isnan(e)) ++cell.failures;
      }
      cell.median = median_of(cell.errors);
      cell.iqr = iqr_of(cell.errors);
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

std::string compare_csv(const CompareTable& table) {
  std::ostringstream out;
  out << "method,duration_s,trials,median_le_deg,iqr_le_deg,failures\n";
  for (const auto& c : table.cells) {
    out << method_name(c.method) << ',' << fmt(c.duration) << ',' << c.errors.size() << ','
        << fmt(c.median) << ',' << fmt(c.iqr) << ',' << c.failures << '\n';
  }
  return out.str();
}

std::string compare_trials_csv(const CompareTable& table) {
  std::ostringstream out;
  out << "method,duration_s,trial,seed,le_deg\n";
  for (const auto& c : table.cells) {
    for (std::size_t t = 0; t < c.errors.size(); ++t) {
      out << method_name(c.method) << ',' << fmt(c.duration) << ',' << t << ',' << table.seeds[t]
          << ',' << fmt(c.errors[t]) << '\n';
    }
  }
  return out.str();
}

std::string cmd_localize(const JobConfig& config) {
  const Localizer localizer(config);
  std::vector<GridPoint> truths;
  const MultichannelSignal signal = load_input(config, &truths);
  const fs::path dir = prepare_output_dir(config);

  const Spectrogram spec = stft(signal, config.stft);
  if (config.spectrogram_dump == SpectrogramDump::Csv) {
    std::ofstream out(dir / "spectrogram.csv", std::ios::binary);
    write_spectrogram_csv(out, spec);
  } else if (config.spectrogram_dump == SpectrogramDump::Binary) {
    std::ofstream out(dir / "spectrogram.bin", std::ios::binary);
    write_spectrogram_binary(out, spec);
  }

  if (signal.channels() != localizer.array().size()) {
    throw ConfigError("input has " + std::to_string(signal.channels()) +
                      " channels but the array has " + std::to_string(localizer.array().size()) +
                      " microphones");
  }
  const LocalizationResult result = localizer.run(spec, config.method);
  const bool known = config.input == InputKind::Scenario;
  write_text(dir / "report.json", report_json(config, result, known ? &truths : nullptr));
  {
    std::ostringstream map;
    write_map_csv(map, localizer.grid_for(result), result.map);
    write_text(dir / "map.csv", map.str());
  }
  if (config.trace) write_text(dir / "trace.csv", trace_csv(result.trace));

  std::ostringstream summary;
  summary << method_name(config.method) << ": " << result.peaks.estimates.size() << " estimate(s)";
  if (result.iterations > 0) summary << " after " << result.iterations << " iteration(s)";
  summary << '\n';
  for (const auto& e : result.peaks.estimates) {
    summary << "  #" << e.rank << "  elevation " << fmt(e.elevation_deg) << "  azimuth "
            << fmt(e.azimuth_deg) << "  score " << fmt(e.score) << '\n';
  }
  if (known) {
    summary << "  LE " << fmt(localization_error(result.peaks.estimates, truths).degrees)
            << " deg\n";
  }
  summary << "report written to " << (dir / "report.json").string() << '\n';
  return summary.str();
}

std::string cmd_compare(const JobConfig& config) {
  if (config.input != InputKind::Scenario) {
    throw ConfigError("input.kind: compare runs on simulated scenarios only");
  }
  const CompareTable table = run_compare(config);
  const fs::path dir = prepare_output_dir(config);
  const std::string csv = compare_csv(table);
  write_text(dir / "compare.csv", csv);
  write_text(dir / "compare_trials.csv", compare_trials_csv(table));
  return csv;
}

std::string cmd_simulate(const JobConfig& config) {
  const Scenario scenario = scenario_from(config, config.duration, config.seed);
  const MultichannelSignal signal = synthesize(scenario);
  const fs::path dir = prepare_output_dir(config);
  save_wav((dir / "scenario.wav").string(), signal, WavEncoding::Float32);

  json truth;
  truth["sources"] = sources_json(config.sources);
  truth["seed"] = config.seed;
  truth["snr_db"] = config.noise ? json(config.snr_db) : json(nullptr);
  truth["reverb"] = config.reverb.enabled
                        ? json{{"kind", "exponential"},
                               {"t60", config.reverb.t60},
                               {"echo_density", config.reverb.echo_density},
                               {"drr_db", config.reverb.drr_db}}
                        : json{{"kind", "none"}};
  truth["sample_rate"] = signal.sample_rate;
  truth["channels"] = signal.channels();
  truth["samples"] = signal.length();
  write_text(dir / "truth.json", truth.dump(2) + "\n");

  std::ostringstream summary;
  summary << signal.channels() << " channels x " << signal.length() << " samples written to "
          << (dir / "scenario.wav").string() << '\n';
  return summary.str();
}

std::string cmd_grid_info(const JobConfig& config) {
  const Localizer localizer(config);
  const FrequencyBand fb = localizer.band(config.sample_rate);
  auto grid_json = [](const DoaGrid& g) {
    return json{{"points", g.size()},
                {"elevation_count", g.elevation_count},
                {"azimuth_count", g.azimuth_count},
                {"elevation_step", g.spec.elevation_step},
                {"azimuth_step", g.spec.azimuth_step}};
  };
  json info;
  info["coarse"] = grid_json(localizer.coarse_grid());
  info["fine"] = grid_json(localizer.fine_grid());
  info["microphones"] = localizer.array().size();
  info["pairs"] = localizer.array().pair_count();
  info["band_bins"] = fb.size();
  if (!fb.bins.empty()) {
    info["band_low_hz"] = fb.frequency(0);
    info["band_high_hz"] = fb.frequency(fb.size() - 1);
  }
  return info.dump(2) + "\n";
}

}  // namespace srpsbl
