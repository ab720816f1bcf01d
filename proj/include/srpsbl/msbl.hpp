#ifndef SRPSBL_MSBL_HPP
#define SRPSBL_MSBL_HPP

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "srpsbl/dictionary.hpp"
#include "srpsbl/srp.hpp"
#include "srpsbl/stft.hpp"

namespace srpsbl {

/// Hyperparameter state of multi-dictionary SBL.
struct MsblState {
  VectorXd gamma;           // Q, all >= 0
  VectorXd noise_variance;  // one sigma^2 per bin
  int iteration = 0;
  double last_relative_change = std::numeric_limits<double>::infinity();
};

struct MsblOptions {
  double convergence_threshold = 1e-3;
  int max_iterations = 200;
  /// gamma_q < prune_ratio * max(gamma) is set to zero after each update.
  double prune_ratio = 1e-8;
  /// sigma_k^2 starts at this fraction of the mean diagonal power of Z_k Z_k^T / T.
  double noise_fraction = 0.1;
  /// Overrides the initial sigma^2 for every bin.
  std::optional<double> noise_variance;
  /// Re-estimates sigma_k^2 by maximum likelihood after every update.
  bool refit_noise = false;
  /// Scales every Z_k to unit mean power before solving.
  bool normalize_bins = false;
  std::optional<VectorXd> initial_gamma;
  /// Called after every update, e.g. to record a trace.
  std::function<void(const MsblState&)> observer;
};

/// Nonnegative weights over the fine grid produced by one of the solvers.
struct SparseMap {
  VectorXd weights;
  std::string solver_tag;
  int iterations = 0;
  bool converged = false;
};

/// SRP data projected onto each bin's dictionary column space:
/// scatter_k = Y_k Y_k^T with Y_k = basis_k^T Z_k, plus the energy left
/// outside that space.
struct MsblProblem {
  std::vector<MatrixXd> scatter;
  std::vector<MatrixXd> scatter_root;  // r x p factors with root root^T = scatter
  VectorXd total_power;     // ||Z_k||_F^2
  VectorXd residual_power;  // ||Z_k - basis basis^T Z_k||_F^2
  int frames = 0;
  int points = 0;
};

MsblProblem prepare_msbl(const std::vector<MatrixXd>& slices, const DictionarySet& dict,
                         bool normalize_bins = false);
MsblProblem prepare_msbl(const SrpTensor& srp, const DictionarySet& dict,
                         bool normalize_bins = false);

MsblState msbl_initial_state(const MsblProblem& problem, const DictionarySet& dict,
                             const MsblOptions& options = {});

/// One evidence-maximisation step:
///   gamma_q <- gamma_q / T * sum_k ||Z_k^T S_k^-1 D_kq||^2 / sum_k D_kq^T S_k^-1 D_kq
/// with S_k = sigma_k^2 I + D_k diag(gamma) D_k^T, evaluated in the reduced
/// coordinates of the dictionary (exact, since every D_kq lies in the span
/// of the basis).
MsblState msbl_update(const MsblState& state, const MsblProblem& problem,
                      const DictionarySet& dict, const MsblOptions& options = {});
MsblState msbl_update(const MsblState& state, const SrpTensor& srp, const DictionarySet& dict);

/// Iterates msbl_update until the relative change drops below the threshold.
SparseMap msbl_solve(const SrpTensor& srp, const DictionarySet& dict,
                     const MsblOptions& options = {});
SparseMap msbl_solve(const MsblProblem& problem, const DictionarySet& dict,
                     const MsblOptions& options = {});

/// Complex M-SBL on the microphone spectra with Green's-function
/// dictionaries G_k (M x Q): the baseline that skips the SRP stage.
SparseMap msbl_direct_solve(const Spectrogram& spec, const MicArray& array,
                            const DoaGrid& fine_grid, const FrequencyBand& band,
                            const DictionaryOptions& dictionary_options,
                            const MsblOptions& options = {});

}  // namespace srpsbl

#endif  // SRPSBL_MSBL_HPP
