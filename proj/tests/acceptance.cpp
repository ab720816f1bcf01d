// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
// Each criterion's wall-clock budget is part of its verdict.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "srpsbl/config.hpp"
#include "srpsbl/dictionary.hpp"
#include "srpsbl/geometry.hpp"
#include "srpsbl/localize.hpp"
#include "srpsbl/msbl.hpp"
#include "srpsbl/pipeline.hpp"
#include "srpsbl/sim.hpp"
#include "srpsbl/somp.hpp"
#include "srpsbl/srp.hpp"
#include "srpsbl/stft.hpp"

using namespace srpsbl;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Verdict {
  bool pass = false;
  std::string detail;
};

MatrixXd gaussian(std::mt19937& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  }
  return m;
}

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

JobConfig config_with(const std::map<std::string, std::string>& values) {
  KeyValueConfig doc;
  for (const auto& [k, v] : values) doc.set(k, v);
  return job_config_from(doc);
}

// ---------------------------------------------------------------------------

Verdict grid_counts() {
  const int coarse = build_doa_grid(15.0, 10.0).size();
  const int fine = build_doa_grid(2.0, 2.0).size();
  return {coarse == 247 && fine == 8281,
          "coarse " + std::to_string(coarse) + ", fine " + std::to_string(fine)};
}

// Time-domain GCC-PHAT: whiten each frame to unit spectral magnitude by naive
// DFT, return to time and circularly cross-correlate.
VectorXd unit_magnitude_signal(const VectorXd& x) {
  const auto n = static_cast<int>(x.size());
  std::vector<cdouble> spec(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    cdouble acc = 0.0;
    for (int i = 0; i < n; ++i) acc += x(i) * std::polar(1.0, -2.0 * kPi * k * i / n);
    spec[static_cast<std::size_t>(k)] = acc / std::abs(acc);
  }
  VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    cdouble acc = 0.0;
    for (int k = 0; k < n; ++k) acc += spec[static_cast<std::size_t>(k)] * std::polar(1.0, 2.0 * kPi * k * i / n);
    out(i) = acc.real() / n;
  }
  return out;
}

Verdict gcc_equivalence() {
  std::mt19937 rng(2);
  const int n = 64;
  const double fs = 16000.0;
  const MicArray pair({Vec3(0, 0, 0), Vec3(0.1, 0, 0)});
  StftOptions opt;
  opt.frame_length = n;
  opt.overlap = 0.0;
  opt.window = WindowKind::Rectangular;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const MultichannelSignal s{gaussian(rng, 2, n), fs};
    const Spectrogram spec = stft(s, opt);
    const WhitenedCrossSpectra cross = whiten(spec, pair.pairs());
    const VectorXd a = unit_magnitude_signal(s.samples.row(0).transpose());
    const VectorXd b = unit_magnitude_signal(s.samples.row(1).transpose());
    for (int lag = -n / 2; lag < n / 2; ++lag) {
      double oracle = 0.0;
      for (int i = 0; i < n; ++i) oracle += a(i) * b(((i - lag) % n + n) % n);
      oracle *= n;
      VectorXd tau(1);
      tau(0) = -lag / fs;
      double steered = 0.0;
      for (int k = 0; k <= n / 2; ++k) {
        const double weight = (k == 0 || k == n / 2) ? 1.0 : 2.0;
        steered += weight * srp_bin(cross, k, 0, tau, spec.frequency(k));
      }
      worst = std::max(worst, std::abs(steered - oracle) / std::max(1.0, std::abs(oracle)));
    }
  }
  return {worst <= 1e-6, "max relative deviation " + num(worst) + " over 50 trials"};
}

Verdict tdoa_consistency() {
  const MicArray a = uma16_array();
  const DoaGrid g = build_doa_grid(15.0, 10.0);
  const FrequencyBand band = make_band(300.0, 4000.0, 48000.0, 1024, 2);
  double worst = 0.0;
  long checked = 0;
  for (int i = 0; i < 8; ++i) {
    const double f = band.frequency(i * (band.size() - 1) / 7);
    const double k = wavenumber(f, a.sound_speed());
    for (const auto& p : g.points) {
      for (const auto& pr : a.pairs()) {
        const double tau = tdoa(a, pr, p.unit, Propagation::FarField);
        if (std::abs(2.0 * kPi * f * tau) >= kPi) continue;
        worst = std::max(worst, std::abs(tdoa_from_rtf(rtf(a, pr, p.unit, k, Propagation::FarField), f) - tau));
        ++checked;
      }
    }
  }
  return {worst <= 1e-9, "max deviation " + num(worst) + " s over " + std::to_string(checked) + " unwrapped cases"};
}

Verdict synthesis_identity() {
  const MicArray a = uma16_array();
  const DoaGrid coarse = build_doa_grid(15.0, 10.0);
  const DoaGrid fine = build_doa_grid(2.0, 2.0);
  const FrequencyBand band = make_band(300.0, 4000.0, 48000.0, 1024, 2);
  const DictionarySet d = build_dictionary(a, coarse, fine, band);
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> pick(0, fine.size() - 1);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int q = pick(rng);
    for (int k = 0; k < band.size(); ++k) {
      Scenario sc;
      sc.sources = {{fine[q], {SignalKind::Tone, band.frequency(k), 0.4}, 1.0}};
      sc.duration = 3072.0 / 48000.0;
      sc.snr_db.reset();
      FrequencyBand one = band;
      one.bins = {band.bins[static_cast<std::size_t>(k)]};
      const SrpTensor z = srp_tensor(whiten(stft(synthesize(sc)), a.pairs(), one), coarse, a);
      const VectorXd col = dictionary_column(d, k, q);
      for (int t = 0; t < z.frame_count(); ++t) {
        worst = std::max(worst, (z.slices[0].col(t) - col).norm() / col.norm());
      }
    }
  }
  return {worst <= 1e-6, "max relative deviation " + num(worst) + " over 10 points x " +
                             std::to_string(band.size()) + " bins"};
}

const CompareCell& cell_of(const CompareTable& table, Method m, double duration) {
  for (const auto& c : table.cells) {
    if (c.method == m && c.duration == duration) return c;
  }
  throw std::runtime_error("missing compare cell");
}

Verdict resolution() {
  JobConfig config = config_with({{"scenario.signal", "speech_shaped"},
                                  {"scenario.snr_db", "20"},
                                  {"scenario.reverb", "exponential"},
                                  {"scenario.t60", "0.5"},
                                  {"scenario.sources", "-6:76, 6:76, 20:128"},
                                  {"compare.methods", "srp_sbl, srp_phat"},
                                  {"compare.durations", "1"},
                                  {"compare.trials", "20"},
                                  {"seed", "1"}});
  const int bins = Localizer(config).band(config.sample_rate).size();
  const CompareTable table = run_compare(config);
  const CompareCell& sbl = cell_of(table, Method::SrpSbl, 1.0);
  const CompareCell& phat = cell_of(table, Method::SrpPhat, 1.0);
  const bool ok = bins <= 64 && sbl.failures == 0 && phat.failures == 0 && sbl.median <= 5.0 &&
                  sbl.median < phat.median;
  return {ok, "median LE srp_sbl " + num(sbl.median) + " deg, srp_phat " + num(phat.median) +
                  " deg, " + std::to_string(bins) + " bins"};
}

Verdict duration_robustness() {
  JobConfig config = config_with({{"scenario.signal", "speech_shaped"},
                                  {"scenario.snr_db", "20"},
                                  {"scenario.reverb", "exponential"},
                                  {"scenario.t60", "0.5"},
                                  {"scenario.sources", "-6:76, 6:76, 20:128"},
                                  {"compare.methods", "srp_sbl, srp_s"},
                                  {"compare.durations", "0.25, 0.5, 1, 2"},
                                  {"compare.trials", "10"},
                                  {"seed", "101"}});
  const CompareTable table = run_compare(config);
  std::string detail;
  int failures = 0;
  for (Method m : {Method::SrpSbl, Method::SrpS}) {
    detail += std::string(method_name(m)) + ":";
    for (double dur : {0.25, 0.5, 1.0, 2.0}) {
      const CompareCell& c = cell_of(table, m, dur);
      detail += " " + num(c.median);
      failures += c.failures;
    }
    detail += "; ";
  }
  const double sbl_short = cell_of(table, Method::SrpSbl, 0.25).median;
  const double sbl_long = cell_of(table, Method::SrpSbl, 2.0).median;
  const double s_short = cell_of(table, Method::SrpS, 0.25).median;
  const double s_long = cell_of(table, Method::SrpS, 2.0).median;
  const bool ok = failures == 0 && std::abs(sbl_short - sbl_long) <= 3.0 &&
                  (s_short > s_long || s_short > sbl_short);
  return {ok, "median LE at 0.25/0.5/1/2 s, " + detail + "failed runs " + std::to_string(failures)};
}

// Exhaustive least squares over all two-row supports of the stacked bins.
std::pair<int, int> brute_force_pair(const MatrixXd& d, const MatrixXd& z) {
  double best = std::numeric_limits<double>::infinity();
  std::pair<int, int> arg{-1, -1};
  for (int a = 0; a < d.cols(); ++a) {
    for (int b = a + 1; b < d.cols(); ++b) {
      MatrixXd sub(d.rows(), 2);
      sub << d.col(a), d.col(b);
      const double res = (z - sub * sub.colPivHouseholderQr().solve(z)).squaredNorm();
      if (res < best) {
        best = res;
        arg = {a, b};
      }
    }
  }
  return arg;
}

Verdict solver_properties() {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  // (a) nonnegativity and absorbing zeros
  bool nonneg = true;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<MatrixXd> d, z;
    for (int k = 0; k < 2; ++k) {
      d.push_back(gaussian(rng, 5, 12));
      z.push_back(gaussian(rng, 5, 3));
    }
    const DictionarySet dict = dictionary_from_matrices(d);
    MsblState s;
    s.gamma.resize(12);
    for (int q = 0; q < 12; ++q) s.gamma(q) = u(rng) < 0.3 ? 0.0 : 3.0 * u(rng);
    s.noise_variance = VectorXd::Constant(2, 1e-3 + u(rng));
    const MsblState next = msbl_update(s, prepare_msbl(z, dict), dict);
    for (int q = 0; q < 12; ++q) {
      if (!std::isfinite(next.gamma(q)) || next.gamma(q) < 0.0) nonneg = false;
      if (s.gamma(q) == 0.0 && next.gamma(q) != 0.0) nonneg = false;
    }
  }

  // (b) scalar fixed point
  double worst_fixed = 0.0;
  int most_iterations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const double zv = 0.5 + 2.5 * u(rng), dv = 0.5 + 1.5 * u(rng);
    const double sigma2 = (0.01 + 0.79 * u(rng)) * zv * zv;
    const DictionarySet dict = dictionary_from_matrices({MatrixXd::Constant(1, 1, dv)});
    MsblOptions opt;
    opt.noise_variance = sigma2;
    opt.initial_gamma = VectorXd::Constant(1, 0.01 + 5.0 * u(rng));
    opt.convergence_threshold = 1e-12;
    opt.max_iterations = 200;
    const SparseMap map = msbl_solve(prepare_msbl({MatrixXd::Constant(1, 1, zv)}, dict), dict, opt);
    worst_fixed = std::max(worst_fixed, std::abs(map.weights(0) - (zv * zv - sigma2) / (dv * dv)));
    most_iterations = std::max(most_iterations, map.iterations);
  }

  // (c) exact support recovery against brute force
  int msbl_hits = 0, somp_hits = 0, brute_hits = 0;
  const int trials = 20;
  std::uniform_int_distribution<int> pick(0, 19);
  for (int trial = 0; trial < trials; ++trial) {
    const int q1 = pick(rng);
    int q2 = pick(rng);
    while (q2 == q1) q2 = pick(rng);
    const std::pair<int, int> truth{std::min(q1, q2), std::max(q1, q2)};
    MatrixXd s = MatrixXd::Zero(20, 6);
    s.row(q1) = gaussian(rng, 1, 6);
    s.row(q2) = gaussian(rng, 1, 6);
    std::vector<MatrixXd> d, z;
    for (int k = 0; k < 2; ++k) {
      d.push_back(gaussian(rng, 8, 20));
      z.push_back(d.back() * s);
    }
    MatrixXd d_stack(16, 20), z_stack(16, 6);
    d_stack << d[0], d[1];
    z_stack << z[0], z[1];
    // The rows are shared by both bins, so stacking them is the same problem.
    if (brute_force_pair(d_stack, z_stack) == truth) ++brute_hits;

    const DictionarySet dict = dictionary_from_matrices(d);
    MsblOptions opt;
    opt.noise_variance = 1e-8;
    const SparseMap map = msbl_solve(prepare_msbl(z, dict), dict, opt);
    std::vector<int> idx(20);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return map.weights(a) > map.weights(b); });
    if (std::pair{std::min(idx[0], idx[1]), std::max(idx[0], idx[1])} == truth) ++msbl_hits;

    const SompResult r = somp(z_stack, d_stack, 2);
    if (r.support.size() == 2 &&
        std::pair{std::min(r.support[0], r.support[1]), std::max(r.support[0], r.support[1])} == truth) {
      ++somp_hits;
    }
  }

  const bool ok = nonneg && worst_fixed <= 1e-6 && most_iterations <= 200 && brute_hits == trials &&
                  msbl_hits == trials && somp_hits == trials;
  return {ok, std::string("(a) ") + (nonneg ? "ok" : "violated") + " over 1000 updates; (b) max error " +
                  num(worst_fixed) + " within " + std::to_string(most_iterations) +
                  " iterations; (c) brute force " + std::to_string(brute_hits) + "/20, M-SBL " +
                  std::to_string(msbl_hits) + "/20, SOMP " + std::to_string(somp_hits) + "/20"};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + SRPSBL_CLI_PATH + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = s.str();
  }
  return files;
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "srpsbl_acceptance_determinism";
  const std::string fast =
      " --set grid.fine.elevation_step=6 --set grid.fine.azimuth_step=6 --set band.stride=8";
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"srp_sbl", "localize -q --set method=srp_sbl --set solver.trace=true --set output.spectrogram=csv"},
      {"srp_sbl_fast", "localize -q --set method=srp_sbl --set seed=5" + fast},
      {"srp_s", "localize -q --set method=srp_s" + fast},
      {"srp_phat", "localize -q --set method=srp_phat"},
      {"msbl_direct", "localize -q --set method=msbl_direct" + fast},
      {"compare", "compare -q -j 2 --set compare.trials=3 --set compare.durations=0.25,0.5" + fast},
      {"simulate", "simulate -q --set seed=9"}};
  int identical = 0;
  std::string mismatch;
  for (const auto& [name, args] : runs) {
    const fs::path dir = root / name;
    std::map<std::string, std::string> first;
    bool same = true;
    for (int pass = 0; pass < 2; ++pass) {
      fs::remove_all(dir);
      const int code = run_cli(args + " -o '" + dir.string() + "'");
      const auto files = code == 0 ? snapshot(dir) : std::map<std::string, std::string>{};
      if (code != 0 || files.empty()) same = false;
      if (pass == 0) first = files;
      else if (files != first) same = false;
    }
    if (same) ++identical;
    else mismatch += " " + name;
  }
  fs::remove_all(root);
  return {identical == static_cast<int>(runs.size()),
          std::to_string(identical) + "/" + std::to_string(runs.size()) +
              " CLI runs byte-identical on repeat" + (mismatch.empty() ? "" : ", differing:" + mismatch)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    double budget_s;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "grid cardinalities", 1.0, grid_counts},
      {2, "GCC-PHAT equivalence", 10.0, gcc_equivalence},
      {3, "TDOA consistency", 5.0, tdoa_consistency},
      {4, "synthesis identity", 30.0, synthesis_identity},
      {5, "resolution of close sources", 15.0 * 60.0, resolution},
      {6, "duration robustness", 30.0 * 60.0, duration_robustness},
      {7, "solver properties", 120.0, solver_properties},
      {8, "determinism", std::numeric_limits<double>::infinity(), determinism}};

  std::vector<int> only;
  if (const char* sel = std::getenv("SRPSBL_ACCEPTANCE_ONLY")) {
    std::istringstream in(sel);
    for (std::string tok; std::getline(in, tok, ',');) only.push_back(std::stoi(tok));
  }

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds <= c.budget_s;
    const bool pass = v.pass && in_time;
    if (!pass) ++failed;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << v.detail
              << "; " << num(seconds) << " s";
    if (std::isfinite(c.budget_s)) std::cout << " of " << num(c.budget_s) << " s";
    if (!in_time) std::cout << " (over budget)";
    std::cout << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
