// srpsbl: simulate scenarios, localize sources, compare localizers.
//
//   srpsbl localize [-c job.cfg] [--set key=value ...] [-o DIR]
//   srpsbl compare  [-c job.cfg] [--set key=value ...] [-o DIR] [-j N]
//   srpsbl simulate [-c job.cfg] [--set key=value ...] [-o DIR]
//   srpsbl grid-info [-c job.cfg] [--set key=value ...]
//
// SRPSBL_OUTPUT_DIR and SRPSBL_JOBS override output.dir and compare.jobs;
// command-line flags override both. Exit codes: 0 ok, 2 configuration or
// input error, 3 numerical failure.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "srpsbl/config.hpp"
#include "srpsbl/log.hpp"
#include "srpsbl/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  int jobs = 0;
  bool quiet = false;
};

srpsbl::JobConfig resolve(const Options& opts) {
  srpsbl::KeyValueConfig doc;
  if (!opts.config_path.empty()) doc = srpsbl::KeyValueConfig::load(opts.config_path);
  if (const char* dir = std::getenv("SRPSBL_OUTPUT_DIR"); dir && *dir) doc.set("output.dir", dir);
  if (const char* jobs = std::getenv("SRPSBL_JOBS"); jobs && *jobs) doc.set("compare.jobs", jobs);
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw srpsbl::ConfigError("--set expects key=value, got '" + kv + "'");
    doc.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!opts.output_dir.empty()) doc.set("output.dir", opts.output_dir);
  if (opts.jobs > 0) doc.set("compare.jobs", std::to_string(opts.jobs));
  return srpsbl::job_config_from(doc);
}

void add_common(CLI::App* cmd, Options& opts) {
  cmd->add_option("-c,--config", opts.config_path, "Key-value job configuration file");
  cmd->add_option("-s,--set", opts.overrides, "Override a configuration key (key=value)");
  cmd->add_option("-o,--output", opts.output_dir, "Output directory");
  cmd->add_flag("-q,--quiet", opts.quiet, "Suppress warnings");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source sound localization with SRP maps and sparse Bayesian learning"};
  app.require_subcommand(1);
  Options opts;

  auto* localize = app.add_subcommand("localize", "Localize sources in a recording or scenario");
  auto* compare = app.add_subcommand("compare", "Compare localizers over durations and trials");
  auto* simulate = app.add_subcommand("simulate", "Render a scenario to WAV plus a truth file");
  auto* grid_info = app.add_subcommand("grid-info", "Print grid and band sizes");
  for (auto* cmd : {localize, compare, simulate, grid_info}) add_common(cmd, opts);
  compare->add_option("-j,--jobs", opts.jobs, "Trials run in parallel")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (opts.quiet) srpsbl::warnings_enabled() = false;

  try {
    const srpsbl::JobConfig config = resolve(opts);
    if (localize->parsed()) std::cout << srpsbl::cmd_localize(config);
    if (compare->parsed()) std::cout << srpsbl::cmd_compare(config);
    if (simulate->parsed()) std::cout << srpsbl::cmd_simulate(config);
    if (grid_info->parsed()) std::cout << srpsbl::cmd_grid_info(config);
  } catch (const srpsbl::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
