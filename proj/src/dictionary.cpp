#include "srpsbl/dictionary.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/SVD>

#include "srpsbl/log.hpp"

namespace srpsbl {

namespace {

/// Green's functions of every candidate (columns) at every microphone (rows).
MatrixXcd green_matrix(const MicArray& array, const DoaGrid& grid, double k,
                       const DictionaryOptions& options) {
  MatrixXcd g(array.size(), grid.size());
  for (int q = 0; q < grid.size(); ++q) {
    const Vec3 y = candidate_location(array, grid[q].unit, options);
    for (int m = 0; m < array.size(); ++m) g(m, q) = green(y, array.position(m), k, options.mode);
  }
  return g;
}

/// RTFs H_{q,l} = G_{q,m} G*_{q,m'} (L x Q).
MatrixXcd rtf_matrix(const MatrixXcd& g, const std::vector<MicPair>& pairs) {
  MatrixXcd h(static_cast<Eigen::Index>(pairs.size()), g.cols());
  for (std::size_t l = 0; l < pairs.size(); ++l) {
    h.row(static_cast<Eigen::Index>(l)) =
        g.row(pairs[l].first).cwiseProduct(g.row(pairs[l].second).conjugate());
  }
  return h;
}

MatrixXcd normalized_rtf(const MicArray& array, const std::vector<MicPair>& pairs,
                         const DoaGrid& grid, double k, const DictionaryOptions& options) {
  MatrixXcd h = rtf_matrix(green_matrix(array, grid, k, options), pairs);
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      const double mag = std::abs(h(i, j));
      if (mag == 0.0) throw DomainError("relative transfer function vanished");
      h(i, j) /= mag;
    }
  }
  return h;
}

// Orthonormal basis for the column space of d. `span_source` is any matrix
// whose columns span a superspace of it; projecting d onto that first keeps
// the final SVD small (r0 x Q instead of N x Q).
ReducedDictionary reduce(const MatrixXd& span_source, const MatrixXd& d, double tolerance) {
  Eigen::BDCSVD<MatrixXd> outer(span_source, Eigen::ComputeThinU);
  const VectorXd& s0 = outer.singularValues();
  int r0 = 0;
  while (r0 < s0.size() && s0(r0) > (s0.size() > 0 ? s0(0) * 1e-14 : 0.0)) ++r0;
  const MatrixXd u0 = outer.matrixU().leftCols(r0);

  Eigen::BDCSVD<MatrixXd> inner(u0.transpose() * d, Eigen::ComputeThinU);
  const VectorXd& s = inner.singularValues();
  int rank = 0;
  const double cutoff = s.size() > 0 ? s(0) * tolerance : 0.0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  ReducedDictionary r;
  r.basis = u0 * inner.matrixU().leftCols(rank);
  r.coeffs = r.basis.transpose() * d;
  return r;
}

void write_raw(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  write_raw(out, &v, sizeof v);
}

void write_matrix(std::ostream& out, const MatrixXd& m) {
  write_raw(out, m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
}

template <typename T>
bool read_pod(std::istream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

bool read_matrix(std::istream& in, MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
  m.resize(rows, cols);
  return static_cast<bool>(in.read(reinterpret_cast<char*>(m.data()),
                                   static_cast<std::streamsize>(rows * cols * sizeof(double))));
}

std::uint64_t mix(std::uint64_t h, const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
std::uint64_t mix_pod(std::uint64_t h, const T& v) {
  return mix(h, &v, sizeof v);
}

std::uint64_t mix_spec(std::uint64_t h, const GridSpec& s) {
  for (double v : {s.elevation_min, s.elevation_max, s.elevation_step, s.azimuth_min,
                   s.azimuth_max, s.azimuth_step}) {
    h = mix_pod(h, v);
  }
  return h;
}

bool will_materialize(int n, int q, int k, const DictionaryOptions& options) {
  const double bytes = static_cast<double>(n) * q * k * sizeof(double);
  return bytes <= static_cast<double>(options.materialize_limit_bytes);
}

/// Fills A_k and frequency data for every bin of a geometry-built set.
void fill_geometry_terms(DictionarySet& dict, const MicArray& array) {
  for (int k = 0; k < dict.band.size(); ++k) {
    auto& bin = dict.bins[static_cast<std::size_t>(k)];
    bin.frequency = dict.band.frequency(k);
    bin.wavenumber = wavenumber(bin.frequency, array.sound_speed());
    bin.a = rtf_matrix(green_matrix(array, dict.coarse_grid, bin.wavenumber, dict.options),
                       dict.pairs)
                .transpose()
                .conjugate();
  }
}

DictionarySet empty_geometry_set(const MicArray& array, const DoaGrid& coarse_grid,
                                  const DoaGrid& fine_grid, const FrequencyBand& band,
                                  const DictionaryOptions& options) {
  DictionarySet dict;
  dict.array = array;
  dict.coarse_grid = coarse_grid;
  dict.fine_grid = fine_grid;
  dict.band = band;
  dict.pairs = array.pairs();
  dict.options = options;
  dict.points = coarse_grid.size();
  dict.atoms = fine_grid.size();
  dict.bins.resize(static_cast<std::size_t>(band.size()));
  return dict;
}

}  // namespace

Vec3 candidate_location(const MicArray& array, const Vec3& unit, const DictionaryOptions& options) {
  if (options.mode == Propagation::FarField) return unit;
  return array.centroid() + options.near_field_range * unit;
}

MatrixXcd DictionarySet::b_matrix(int k) const {
  if (!array) throw std::logic_error("B_k needs a geometry-built dictionary");
  return normalized_rtf(*array, pairs, fine_grid, bin(k).wavenumber, options);
}

MatrixXd DictionarySet::d_matrix(int k) const {
  const auto& b = bin(k);
  if (b.d.size() > 0) return b.d;
  if (array) return (b.a * b_matrix(k)).real();
  return b.reduced.basis * b.reduced.coeffs;
}

DictionarySet build_dictionary(const MicArray& array, const DoaGrid& coarse_grid,
                               const DoaGrid& fine_grid, const FrequencyBand& band,
                               const DictionaryOptions& options) {
  if (band.bins.empty()) throw ConfigError("dictionary needs a non-empty frequency band");
  if (fine_grid.size() < coarse_grid.size()) {
    warn("fine grid is smaller than the coarse grid; the sparse model is not underdetermined");
  }
  DictionarySet dict = empty_geometry_set(array, coarse_grid, fine_grid, band, options);
  fill_geometry_terms(dict, array);
  const bool keep_d = will_materialize(dict.points, dict.atoms, band.size(), options);

  dict.band_average = MatrixXd::Zero(dict.points, dict.atoms);
  for (int k = 0; k < band.size(); ++k) {
    auto& bin = dict.bins[static_cast<std::size_t>(k)];
    const MatrixXcd b = dict.b_matrix(k);
    MatrixXd d = bin.a.real() * b.real();
    d.noalias() -= bin.a.imag() * b.imag();

    MatrixXd span(dict.points, 2 * bin.a.cols());
    span << bin.a.real(), bin.a.imag();
    bin.reduced = reduce(span, d, options.rank_tolerance);
    dict.band_average += d;
    if (keep_d) bin.d = std::move(d);
  }
  dict.band_average /= static_cast<double>(band.size());
  return dict;
}

DictionarySet dictionary_from_matrices(std::vector<MatrixXd> d, double rank_tolerance) {
  if (d.empty()) throw ConfigError("dictionary needs at least one bin");
  DictionarySet dict;
  dict.points = static_cast<int>(d[0].rows());
  dict.atoms = static_cast<int>(d[0].cols());
  dict.options.rank_tolerance = rank_tolerance;
  dict.band_average = MatrixXd::Zero(dict.points, dict.atoms);
  for (auto& dk : d) {
    if (dk.rows() != dict.points || dk.cols() != dict.atoms) {
      throw ConfigError("dictionary bins must share one shape");
    }
    BinDictionary bin;
    bin.reduced = reduce(dk, dk, rank_tolerance);
    dict.band_average += dk;
    bin.d = std::move(dk);
    dict.bins.push_back(std::move(bin));
    dict.band.bins.push_back(static_cast<int>(dict.bins.size()) - 1);
  }
  dict.band_average /= static_cast<double>(dict.bins.size());
  return dict;
}

VectorXd dictionary_column(const DictionarySet& dict, int k, int q) {
  if (k < 0 || k >= dict.bin_count() || q < 0 || q >= dict.atom_count()) {
    throw std::out_of_range("dictionary column index out of range");
  }
  const auto& b = dict.bin(k);
  if (b.d.size() > 0) return b.d.col(q);
  if (!dict.array) return b.reduced.basis * b.reduced.coeffs.col(q);

  const Vec3 y = candidate_location(*dict.array, dict.fine_grid[q].unit, dict.options);
  VectorXcd bq(static_cast<Eigen::Index>(dict.pairs.size()));
  for (std::size_t l = 0; l < dict.pairs.size(); ++l) {
    const cdouble h = rtf(*dict.array, dict.pairs[l], y, b.wavenumber, dict.options.mode);
    bq(static_cast<Eigen::Index>(l)) = h / std::abs(h);
  }
  return (b.a * bq).real();
}

std::uint64_t dictionary_cache_key(const MicArray& array, const DoaGrid& coarse_grid,
                                   const DoaGrid& fine_grid, const FrequencyBand& band,
                                   const DictionaryOptions& options) {
  std::uint64_t h = array.fingerprint();
  h = mix_spec(h, coarse_grid.spec);
  h = mix_spec(h, fine_grid.spec);
  h = mix_pod(h, band.sample_rate);
  h = mix_pod(h, band.fft_length);
  for (int b : band.bins) h = mix_pod(h, b);
  h = mix_pod(h, static_cast<int>(options.mode));
  h = mix_pod(h, options.near_field_range);
  h = mix_pod(h, options.rank_tolerance);
  const bool keep = will_materialize(coarse_grid.size(), fine_grid.size(), band.size(), options);
  return mix_pod(h, keep);
}

void save_dictionary(const std::string& path, const DictionarySet& dict, std::uint64_t key) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dictionary cache '" + path + "'");
  out.write("SRPDICT1", 8);
  write_pod(out, key);
  write_pod(out, static_cast<std::uint32_t>(dict.points));
  write_pod(out, static_cast<std::uint32_t>(dict.atoms));
  write_pod(out, static_cast<std::uint32_t>(dict.bin_count()));
  const std::uint8_t mat = dict.materialized() ? 1 : 0;
  write_pod(out, mat);
  for (const auto& bin : dict.bins) {
    write_pod(out, static_cast<std::uint32_t>(bin.reduced.rank()));
    write_matrix(out, bin.reduced.basis);
    write_matrix(out, bin.reduced.coeffs);
    if (mat) write_matrix(out, bin.d);
  }
  write_matrix(out, dict.band_average);
  if (!out) throw IoError("failed writing dictionary cache '" + path + "'");
}

std::optional<DictionarySet> load_dictionary(const std::string& path, const MicArray& array,
                                             const DoaGrid& coarse_grid, const DoaGrid& fine_grid,
                                             const FrequencyBand& band,
                                             const DictionaryOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, "SRPDICT1", 8) != 0) return std::nullopt;
  std::uint64_t key = 0;
  std::uint32_t n = 0, q = 0, kc = 0;
  std::uint8_t mat = 0;
  if (!read_pod(in, key) || !read_pod(in, n) || !read_pod(in, q) || !read_pod(in, kc) ||
      !read_pod(in, mat)) {
    return std::nullopt;
  }
  if (key != dictionary_cache_key(array, coarse_grid, fine_grid, band, options) ||
      static_cast<int>(n) != coarse_grid.size() || static_cast<int>(q) != fine_grid.size() ||
      static_cast<int>(kc) != band.size()) {
    return std::nullopt;
  }

  DictionarySet dict = empty_geometry_set(array, coarse_grid, fine_grid, band, options);
  fill_geometry_terms(dict, array);
  for (auto& bin : dict.bins) {
    std::uint32_t r = 0;
    if (!read_pod(in, r) || r > n) return std::nullopt;
    if (!read_matrix(in, bin.reduced.basis, n, r) || !read_matrix(in, bin.reduced.coeffs, r, q)) {
      return std::nullopt;
    }
    if (mat && !read_matrix(in, bin.d, n, q)) return std::nullopt;
  }
  if (!read_matrix(in, dict.band_average, n, q)) return std::nullopt;
  return dict;
}

DictionarySet build_dictionary_cached(const MicArray& array, const DoaGrid& coarse_grid,
                                      const DoaGrid& fine_grid, const FrequencyBand& band,
                                      const DictionaryOptions& options,
                                      const std::string& cache_dir) {
  if (cache_dir.empty()) return build_dictionary(array, coarse_grid, fine_grid, band, options);
  const std::uint64_t key = dictionary_cache_key(array, coarse_grid, fine_grid, band, options);
  std::ostringstream name;
  name << "dict_" << std::hex << key << ".bin";
  const auto path = (std::filesystem::path(cache_dir) / name.str()).string();
  if (auto cached = load_dictionary(path, array, coarse_grid, fine_grid, band, options)) {
    return std::move(*cached);
  }
  DictionarySet dict = build_dictionary(array, coarse_grid, fine_grid, band, options);
  std::filesystem::create_directories(cache_dir);
  save_dictionary(path, dict, key);
  return dict;
}

}  // namespace srpsbl
