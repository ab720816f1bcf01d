#include "srpsbl/msbl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace srpsbl {

namespace {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

constexpr double kTiny = 1e-300;

/// Per-bin view shared by the real (SRP) and complex (microphone) models.
template <typename Scalar>
struct BinView {
  const Mat<Scalar>* coeffs;   // r x Q
  const Mat<Scalar>* scatter;  // r x r
  const Mat<Scalar>* root;     // r x p with root * root^H = scatter
  double residual_power;       // data energy outside the coefficient space
};

constexpr Eigen::Index kColumnBlock = 256;

template <typename Scalar>
Mat<Scalar> scatter_root(const Mat<Scalar>& scatter) {
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(scatter);
  const VectorXd& values = eig.eigenvalues();
  const double top = values.size() > 0 ? std::max(values.maxCoeff(), 0.0) : 0.0;
  Eigen::Index keep = 0;
  for (Eigen::Index i = 0; i < values.size(); ++i) keep += values(i) > 1e-14 * top ? 1 : 0;
  // Eigenvalues ascend, so the kept ones are the trailing columns.
  return eig.eigenvectors().rightCols(keep) *
         values.tail(keep).cwiseSqrt().template cast<Scalar>().asDiagonal();
}

template <typename Scalar>
Eigen::LLT<Mat<Scalar>> factor_with_jitter(Mat<Scalar> m, int iteration) {
  Eigen::LLT<Mat<Scalar>> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  const double scale = std::max(std::abs(m.trace()) / static_cast<double>(m.rows()), kTiny);
  for (double jitter = 1e-10; jitter <= 1e-6 * (1.0 + 1e-12); jitter *= 10.0) {
    Mat<Scalar> shifted = m;
    shifted.diagonal().array() += Scalar(jitter * scale);
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError("evidence covariance is not positive definite at iteration " +
                       std::to_string(iteration));
}

template <typename Scalar>
MsblState sbl_step(const MsblState& state, const std::vector<BinView<Scalar>>& bins, int frames,
                   int dim, const MsblOptions& options) {
  const Eigen::Index q_count = state.gamma.size();
  std::vector<Eigen::Index> active;
  active.reserve(static_cast<std::size_t>(q_count));
  for (Eigen::Index q = 0; q < q_count; ++q) {
    if (state.gamma(q) > 0.0) active.push_back(q);
  }
  const auto a_count = static_cast<Eigen::Index>(active.size());
  const bool all_active = a_count == q_count;

  VectorXd gamma_a(a_count);
  for (Eigen::Index i = 0; i < a_count; ++i) gamma_a(i) = state.gamma(active[static_cast<std::size_t>(i)]);

  VectorXd numerator = VectorXd::Zero(a_count);
  VectorXd denominator = VectorXd::Zero(a_count);
  MsblState next = state;
  next.iteration = state.iteration + 1;

  // Bins are reduced in a fixed order so results are bit-reproducible.
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const Mat<Scalar>& full = *bins[k].coeffs;
    Mat<Scalar> gathered;
    if (!all_active) {
      gathered.resize(full.rows(), a_count);
      for (Eigen::Index i = 0; i < a_count; ++i) gathered.col(i) = full.col(active[static_cast<std::size_t>(i)]);
    }
    const Mat<Scalar>& c = all_active ? full : gathered;
    const double sigma2 = state.noise_variance(static_cast<Eigen::Index>(k));

    // M = sigma^2 I + C Gamma C^H = L L^H. Then c_q^H M^-1 c_q = |L^-1 c_q|^2
    // and c_q^H M^-1 R M^-1 c_q = |root^H M^-1 c_q|^2, so one product of the
    // stacked (r + p) x r operator with C yields both terms.
    const Eigen::Index r = c.rows();
    const Eigen::Index cols = c.cols();
    Mat<Scalar> m = Mat<Scalar>::Zero(r, r);
    Mat<Scalar> block;
    for (Eigen::Index j = 0; j < cols; j += kColumnBlock) {
      const Eigen::Index w = std::min(kColumnBlock, cols - j);
      block = c.middleCols(j, w) * gamma_a.segment(j, w).cwiseSqrt().cast<Scalar>().asDiagonal();
      m.template selfadjointView<Eigen::Lower>().rankUpdate(block);
    }
    m = m.template selfadjointView<Eigen::Lower>();
    m.diagonal().array() += Scalar(sigma2);
    const auto llt = factor_with_jitter<Scalar>(std::move(m), next.iteration);

    const Mat<Scalar>& root = *bins[k].root;
    const Eigen::Index p = root.cols();
    Mat<Scalar> op(r + p, r);
    op.topRows(r) = llt.matrixL().solve(Mat<Scalar>::Identity(r, r));
    op.bottomRows(p) = llt.solve(root).adjoint();

    VectorXd num_k(cols);
    VectorXd den_k(cols);
    for (Eigen::Index j = 0; j < cols; j += kColumnBlock) {
      const Eigen::Index w = std::min(kColumnBlock, cols - j);
      block.noalias() = op * c.middleCols(j, w);
      den_k.segment(j, w) = block.topRows(r).colwise().squaredNorm().transpose();
      num_k.segment(j, w) = block.bottomRows(p).colwise().squaredNorm().transpose();
    }
    numerator += num_k;
    denominator += den_k;

    if (options.refit_noise) {
      const Mat<Scalar> m_inv = llt.solve(Mat<Scalar>::Identity(c.rows(), c.rows()));
      const Mat<Scalar> m_inv_r = m_inv * (*bins[k].scatter);
      const double quad = std::abs((m_inv_r.cwiseProduct(m_inv.transpose())).sum());
      const double residual = bins[k].residual_power + sigma2 * sigma2 * quad;
      const double effective = static_cast<double>(dim) - gamma_a.dot(den_k);
      const double dof = std::max(effective, 1e-3 * static_cast<double>(dim));
      next.noise_variance(static_cast<Eigen::Index>(k)) =
          std::max(residual / (static_cast<double>(frames) * dof), kTiny);
    }
  }

  next.gamma = VectorXd::Zero(q_count);
  for (Eigen::Index i = 0; i < a_count; ++i) {
    const double den = denominator(i);
    const double value = den > 0.0 ? gamma_a(i) / frames * numerator(i) / den : 0.0;
    next.gamma(active[static_cast<std::size_t>(i)]) = std::max(value, 0.0);
  }
  if (!next.gamma.allFinite() || !next.noise_variance.allFinite()) {
    throw NumericalError("non-finite hyperparameters at iteration " +
                         std::to_string(next.iteration));
  }

  const double peak = q_count > 0 ? next.gamma.maxCoeff() : 0.0;
  const double cutoff = options.prune_ratio * peak;
  for (Eigen::Index q = 0; q < q_count; ++q) {
    if (next.gamma(q) < cutoff) next.gamma(q) = 0.0;
  }

  const double old_peak = q_count > 0 ? state.gamma.cwiseAbs().maxCoeff() : 0.0;
  const double change = q_count > 0 ? (next.gamma - state.gamma).cwiseAbs().maxCoeff() : 0.0;
  next.last_relative_change = change / std::max(old_peak, kTiny);
  return next;
}

// `roots` backs the views when the problem carries no precomputed roots.
std::vector<BinView<double>> real_views(const MsblProblem& problem, const DictionarySet& dict,
                                        std::vector<MatrixXd>& roots) {
  if (static_cast<int>(problem.scatter.size()) != dict.bin_count()) {
    throw ConfigError("SRP tensor and dictionary have different bin counts");
  }
  const bool precomputed = problem.scatter_root.size() == problem.scatter.size();
  if (!precomputed) {
    roots.clear();
    for (const auto& sc : problem.scatter) roots.push_back(scatter_root<double>(sc));
  }
  const auto& source = precomputed ? problem.scatter_root : roots;
  std::vector<BinView<double>> views;
  views.reserve(problem.scatter.size());
  for (int k = 0; k < dict.bin_count(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    views.push_back({&dict.bin(k).reduced.coeffs, &problem.scatter[i], &source[i],
                     problem.residual_power(k)});
  }
  return views;
}

template <typename Scalar>
MsblState initial_state(const VectorXd& total_power, const std::vector<BinView<Scalar>>& bins,
                        int frames, int dim, Eigen::Index q_count, const MsblOptions& options) {
  const auto k_count = static_cast<Eigen::Index>(bins.size());
  MsblState s;
  s.noise_variance.resize(k_count);
  double mean_power = 0.0;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const double power = total_power(k) / (static_cast<double>(dim) * frames);
    mean_power += power / static_cast<double>(k_count);
    const auto& c = *bins[static_cast<std::size_t>(k)].coeffs;
    const double floor =
        std::max(1e-12 * c.squaredNorm() / (static_cast<double>(dim) * std::max<Eigen::Index>(c.cols(), 1)), kTiny);
    s.noise_variance(k) = std::max(options.noise_variance.value_or(options.noise_fraction * power), floor);
  }
  if (options.initial_gamma) {
    if (options.initial_gamma->size() != q_count || (options.initial_gamma->array() < 0.0).any()) {
      throw ConfigError("initial gamma must be nonnegative with one entry per fine grid point");
    }
    s.gamma = *options.initial_gamma;
  } else {
    s.gamma = VectorXd::Constant(q_count, mean_power / static_cast<double>(q_count));
  }
  return s;
}

void check_options(const MsblOptions& options) {
  if (!(options.convergence_threshold > 0.0)) {
    throw ConfigError("convergence threshold must be positive");
  }
  if (options.max_iterations < 1) throw ConfigError("max iterations must be at least 1");
}

template <typename Scalar>
SparseMap iterate(MsblState state, const std::vector<BinView<Scalar>>& bins, int frames, int dim,
                  const MsblOptions& options, const char* tag) {
  SparseMap out;
  out.solver_tag = tag;
  for (int it = 0; it < options.max_iterations; ++it) {
    state = sbl_step<Scalar>(state, bins, frames, dim, options);
    if (options.observer) options.observer(state);
    if (state.last_relative_change < options.convergence_threshold) {
      out.converged = true;
      break;
    }
  }
  out.weights = state.gamma;
  out.iterations = state.iteration;
  return out;
}

}  // namespace

MsblProblem prepare_msbl(const std::vector<MatrixXd>& slices, const DictionarySet& dict,
                         bool normalize_bins) {
  if (static_cast<int>(slices.size()) != dict.bin_count()) {
    throw ConfigError("SRP tensor and dictionary have different bin counts");
  }
  MsblProblem p;
  p.points = dict.point_count();
  p.frames = slices.empty() ? 0 : static_cast<int>(slices[0].cols());
  if (p.frames < 1) throw ConfigError("SRP tensor has no frames");
  p.total_power.resize(static_cast<Eigen::Index>(slices.size()));
  p.residual_power.resize(static_cast<Eigen::Index>(slices.size()));
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const auto& z_raw = slices[k];
    if (z_raw.rows() != p.points || z_raw.cols() != p.frames) {
      throw ConfigError("SRP slice shape does not match the dictionary");
    }
    if (!z_raw.allFinite()) {
      throw NumericalError("SRP slice " + std::to_string(k) + " holds non-finite values");
    }
    double scale = 1.0;
    if (normalize_bins) {
      const double power = z_raw.squaredNorm() / (static_cast<double>(p.points) * p.frames);
      if (power > 0.0) scale = 1.0 / std::sqrt(power);
    }
    const MatrixXd z = z_raw * scale;
    const MatrixXd& basis = dict.bin(static_cast<int>(k)).reduced.basis;
    const MatrixXd y = basis.transpose() * z;
    p.scatter.push_back(y * y.transpose());
    p.scatter_root.push_back(scatter_root<double>(p.scatter.back()));
    const double total = z.squaredNorm();
    p.total_power(static_cast<Eigen::Index>(k)) = total;
    p.residual_power(static_cast<Eigen::Index>(k)) = std::max(total - y.squaredNorm(), 0.0);
  }
  return p;
}

MsblProblem prepare_msbl(const SrpTensor& srp, const DictionarySet& dict, bool normalize_bins) {
  if (srp.point_count() != dict.point_count()) {
    throw ConfigError("SRP grid size does not match the dictionary coarse grid");
  }
  return prepare_msbl(srp.slices, dict, normalize_bins);
}

MsblState msbl_initial_state(const MsblProblem& problem, const DictionarySet& dict,
                             const MsblOptions& options) {
  std::vector<MatrixXd> roots;
  return initial_state<double>(problem.total_power, real_views(problem, dict, roots), problem.frames,
                               problem.points, dict.atom_count(), options);
}

MsblState msbl_update(const MsblState& state, const MsblProblem& problem,
                      const DictionarySet& dict, const MsblOptions& options) {
  if (state.gamma.size() != dict.atom_count() ||
      state.noise_variance.size() != dict.bin_count()) {
    throw ConfigError("M-SBL state does not match the dictionary");
  }
  if (!state.gamma.allFinite()) throw NumericalError("M-SBL state holds non-finite gamma");
  std::vector<MatrixXd> roots;
  return sbl_step<double>(state, real_views(problem, dict, roots), problem.frames, problem.points,
                          options);
}

MsblState msbl_update(const MsblState& state, const SrpTensor& srp, const DictionarySet& dict) {
  return msbl_update(state, prepare_msbl(srp, dict), dict);
}

SparseMap msbl_solve(const MsblProblem& problem, const DictionarySet& dict,
                     const MsblOptions& options) {
  check_options(options);
  std::vector<MatrixXd> roots;
  const auto views = real_views(problem, dict, roots);
  MsblState state = initial_state<double>(problem.total_power, views, problem.frames,
                                          problem.points, dict.atom_count(), options);
  return iterate<double>(std::move(state), views, problem.frames, problem.points, options,
                         "srp_sbl");
}

SparseMap msbl_solve(const SrpTensor& srp, const DictionarySet& dict, const MsblOptions& options) {
  check_options(options);
  return msbl_solve(prepare_msbl(srp, dict, options.normalize_bins), dict, options);
}

SparseMap msbl_direct_solve(const Spectrogram& spec, const MicArray& array,
                            const DoaGrid& fine_grid, const FrequencyBand& band,
                            const DictionaryOptions& dictionary_options,
                            const MsblOptions& options) {
  check_options(options);
  if (spec.channel_count() != array.size()) {
    throw ConfigError("spectrogram channel count does not match the array");
  }
  if (band.bins.empty()) throw ConfigError("frequency band is empty");
  const int frames = spec.frame_count();
  const int mics = array.size();

  std::vector<MatrixXcd> greens;
  std::vector<MatrixXcd> scatters;
  std::vector<MatrixXcd> roots;
  VectorXd total(band.size());
  greens.reserve(band.bins.size());
  scatters.reserve(band.bins.size());
  for (int i = 0; i < band.size(); ++i) {
    const int k = band.bins[static_cast<std::size_t>(i)];
    if (k >= spec.bin_count()) throw ConfigError("band bin outside the spectrogram");
    const double kw = wavenumber(band.frequency(i), array.sound_speed());
    MatrixXcd g(mics, fine_grid.size());
    for (int q = 0; q < fine_grid.size(); ++q) {
      const Vec3 y = candidate_location(array, fine_grid[q].unit, dictionary_options);
      for (int m = 0; m < mics; ++m) g(m, q) = green(y, array.position(m), kw, dictionary_options.mode);
    }
    MatrixXcd p(mics, frames);
    for (int m = 0; m < mics; ++m) p.row(m) = spec.channels[static_cast<std::size_t>(m)].row(k);
    if (!p.allFinite()) {
      throw NumericalError("spectrogram bin " + std::to_string(k) + " holds non-finite values");
    }
    MatrixXcd s = p * p.adjoint();
    total(i) = s.trace().real();
    greens.push_back(std::move(g));
    roots.push_back(scatter_root<cdouble>(s));
    scatters.push_back(std::move(s));
  }

  std::vector<BinView<cdouble>> views;
  for (std::size_t i = 0; i < greens.size(); ++i) views.push_back({&greens[i], &scatters[i], &roots[i], 0.0});
  MsblState state = initial_state<cdouble>(total, views, frames, mics, fine_grid.size(), options);
  return iterate<cdouble>(std::move(state), views, frames, mics, options, "msbl_direct");
}

}  // namespace srpsbl
