#ifndef SRPSBL_DICTIONARY_HPP
#define SRPSBL_DICTIONARY_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "srpsbl/geometry.hpp"
#include "srpsbl/stft.hpp"

namespace srpsbl {

struct DictionaryOptions {
  Propagation mode = Propagation::FarField;
  /// Candidate distance from the array centroid in near-field mode (meters).
  double near_field_range = 2.0;
  /// D_k is kept in memory only if all bins together fit in this budget.
  std::size_t materialize_limit_bytes = std::size_t{512} << 20;
  /// Singular values below tolerance * largest are dropped from the
  /// column-space basis.
  double rank_tolerance = 1e-10;
};

/// D_k = basis * coeffs, where basis (N x r) has orthonormal columns
/// spanning the column space of D_k.
struct ReducedDictionary {
  MatrixXd basis;
  MatrixXd coeffs;

  int rank() const { return static_cast<int>(basis.cols()); }
};

struct BinDictionary {
  double frequency = 0.0;
  double wavenumber = 0.0;
  MatrixXcd a;  // N x L rows [H*_{n,1} ... H*_{n,L}]; empty for explicit dictionaries
  MatrixXd d;   // N x Q; empty unless materialised
  ReducedDictionary reduced;
};

/// Per-bin SRP synthesis operators A_k (coarse grid, conjugate RTFs),
/// B_k (fine grid, phase-normalised RTFs) and D_k = Re(A_k B_k).
/// B_k is always evaluated on demand; D_k is cached when memory allows.
struct DictionarySet {
  std::optional<MicArray> array;
  DoaGrid coarse_grid;
  DoaGrid fine_grid;
  FrequencyBand band;
  std::vector<MicPair> pairs;
  DictionaryOptions options;
  std::vector<BinDictionary> bins;
  MatrixXd band_average;  // mean over bins of D_k (N x Q)
  int points = 0;
  int atoms = 0;

  int point_count() const { return points; }
  int atom_count() const { return atoms; }
  int bin_count() const { return static_cast<int>(bins.size()); }
  bool materialized() const { return !bins.empty() && bins[0].d.size() > 0; }

  const BinDictionary& bin(int k) const { return bins[static_cast<std::size_t>(k)]; }
  /// L x Q matrix of H_{q,l}/|H_{q,l}|. Requires a geometry-built set.
  MatrixXcd b_matrix(int k) const;
  /// D_k, copied from the cache or recomputed.
  MatrixXd d_matrix(int k) const;
};

/// Candidate location used for grid point `unit` in the given mode.
Vec3 candidate_location(const MicArray& array, const Vec3& unit, const DictionaryOptions& options);

DictionarySet build_dictionary(const MicArray& array, const DoaGrid& coarse_grid,
                               const DoaGrid& fine_grid, const FrequencyBand& band,
                               const DictionaryOptions& options = {});

/// Dictionary set from explicit per-bin matrices (synthetic fixtures).
DictionarySet dictionary_from_matrices(std::vector<MatrixXd> d, double rank_tolerance = 1e-10);

/// Column q of D_k without materialising the rest of D_k.
VectorXd dictionary_column(const DictionarySet& dict, int k, int q);

/// Cache key over geometry, grids, band, mode and storage options.
std::uint64_t dictionary_cache_key(const MicArray& array, const DoaGrid& coarse_grid,
                                   const DoaGrid& fine_grid, const FrequencyBand& band,
                                   const DictionaryOptions& options);

/// Binary cache layout (little-endian):
///   "SRPDICT1", u64 key, u32 N, Q, K, u8 materialised,
///   per bin: u32 r, f64 basis[N*r], f64 coeffs[r*Q], f64 d[N*Q] if materialised,
///   then f64 band_average[N*Q]. Matrices are column-major.
/// A_k is recomputed from geometry on load, so a cached set is bit-identical
/// to a freshly built one.
void save_dictionary(const std::string& path, const DictionarySet& dict, std::uint64_t key);
std::optional<DictionarySet> load_dictionary(const std::string& path, const MicArray& array,
                                             const DoaGrid& coarse_grid, const DoaGrid& fine_grid,
                                             const FrequencyBand& band,
                                             const DictionaryOptions& options);

/// Loads from `cache_dir` when a matching file exists, otherwise builds and
/// stores. An empty `cache_dir` disables caching.
DictionarySet build_dictionary_cached(const MicArray& array, const DoaGrid& coarse_grid,
                                      const DoaGrid& fine_grid, const FrequencyBand& band,
                                      const DictionaryOptions& options,
                                      const std::string& cache_dir);

}  // namespace srpsbl

#endif  // SRPSBL_DICTIONARY_HPP
