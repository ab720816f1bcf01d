#ifndef SRPSBL_PIPELINE_HPP
#define SRPSBL_PIPELINE_HPP

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "srpsbl/config.hpp"
#include "srpsbl/dictionary.hpp"
#include "srpsbl/localize.hpp"
#include "srpsbl/msbl.hpp"
#include "srpsbl/srp.hpp"
#include "srpsbl/stft.hpp"

namespace srpsbl {

/// One solver iteration as recorded for trace.csv.
struct TraceRow {
  int iteration = 0;
  double relative_change = 0.0;
  std::vector<std::pair<int, double>> top_gamma;  // (grid index, gamma), largest first
};

struct LocalizationResult {
  Method method = Method::SrpSbl;
  PeakSelection peaks;
  VectorXd map;        // over the coarse grid for srp_phat, the fine grid otherwise
  bool coarse = false;
  std::string solver_tag;
  int iterations = 0;
  bool converged = true;
  std::vector<TraceRow> trace;
  double runtime_ms = 0.0;
};

/// Runs any of the four localizers on multichannel recordings. Grids and the
/// array are fixed at construction; the SRP dictionary is built on first use
/// for each sample rate and then shared, so run() may be called from several
/// threads.
class Localizer {
 public:
  explicit Localizer(JobConfig config);

  const JobConfig& config() const { return config_; }
  const MicArray& array() const { return array_; }
  const DoaGrid& coarse_grid() const { return coarse_; }
  const DoaGrid& fine_grid() const { return fine_; }
  const DoaGrid& grid_for(const LocalizationResult& result) const {
    return result.coarse ? coarse_ : fine_;
  }

  FrequencyBand band(double sample_rate) const;
  std::shared_ptr<const DictionarySet> dictionary(double sample_rate) const;

  LocalizationResult run(const MultichannelSignal& signal, Method method) const;
  LocalizationResult run(const Spectrogram& spec, Method method) const;

 private:
  MsblOptions solver_options() const;

  JobConfig config_;
  MicArray array_;
  DoaGrid coarse_;
  DoaGrid fine_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::shared_ptr<const DictionarySet>> dictionaries_;
};

/// JSON report text: method, estimates, solver status, truths and LE when
/// known, and the full resolved config. runtime_ms only with output.timing.
std::string report_json(const JobConfig& config, const LocalizationResult& result,
                        const std::vector<GridPoint>* truths);

/// Result of `compare`: one row per (method, duration) in config order.
struct CompareCell {
  Method method = Method::SrpSbl;
  double duration = 0.0;
  std::vector<double> errors;  // per trial, NaN on failure
  double median = 0.0;         // over successful trials, NaN if none
  double iqr = 0.0;
  int failures = 0;
};

struct CompareTable {
  std::vector<CompareCell> cells;
  std::vector<std::uint64_t> seeds;  // per trial
};

/// Trial t uses seed config.seed + t. Each trial synthesizes the longest
/// duration once and truncates it for shorter ones. Trials run on up to
/// config.jobs threads; aggregation is ordered and independent of timing.
CompareTable run_compare(const JobConfig& config);

std::string compare_csv(const CompareTable& table);
std::string compare_trials_csv(const CompareTable& table);

/// Median and interquartile range with linear interpolation between order
/// statistics. NaN entries are ignored; all-NaN gives NaN.
double median_of(std::vector<double> values);
double iqr_of(std::vector<double> values);

// Subcommands. Each writes into config.output_dir and returns a summary for
// stdout. Errors propagate as ConfigError/IoError/NumericalError.
std::string cmd_localize(const JobConfig& config);
std::string cmd_compare(const JobConfig& config);
std::string cmd_simulate(const JobConfig& config);
std::string cmd_grid_info(const JobConfig& config);

}  // namespace srpsbl

#endif  // SRPSBL_PIPELINE_HPP
