#include "srpsbl/somp.hpp"

#include <Eigen/QR>

#include "srpsbl/log.hpp"

namespace srpsbl {

SompResult somp(const MatrixXd& data, const MatrixXd& dictionary, int n_atoms) {
  if (n_atoms < 1) throw ConfigError("SOMP needs at least one atom");
  if (data.rows() != dictionary.rows()) {
    throw ConfigError("SOMP data and dictionary row counts differ");
  }
  const VectorXd atom_norms = dictionary.colwise().norm().transpose();
  if ((atom_norms.array() <= 0.0).any()) throw ConfigError("SOMP dictionary has a zero column");

  SompResult out;
  out.map.solver_tag = "srp_s";
  out.map.weights = VectorXd::Zero(dictionary.cols());
  out.coefficients.resize(0, data.cols());

  const double data_norm = data.norm();
  MatrixXd residual = data;
  out.residual_norms.push_back(residual.norm());
  std::vector<bool> selected(static_cast<std::size_t>(dictionary.cols()), false);

  for (int it = 0; it < n_atoms && it < dictionary.cols(); ++it) {
    if (residual.norm() <= 1e-12 * data_norm || data_norm == 0.0) break;
    VectorXd score = (dictionary.transpose() * residual).cwiseAbs().rowwise().sum();
    score = score.cwiseQuotient(atom_norms);
    Eigen::Index best = -1;
    double best_score = 0.0;
    for (Eigen::Index q = 0; q < score.size(); ++q) {
      if (!selected[static_cast<std::size_t>(q)] && score(q) > best_score) {
        best_score = score(q);
        best = q;
      }
    }
    if (best < 0) break;
    selected[static_cast<std::size_t>(best)] = true;
    out.support.push_back(static_cast<int>(best));

    MatrixXd sub(dictionary.rows(), static_cast<Eigen::Index>(out.support.size()));
    for (std::size_t i = 0; i < out.support.size(); ++i) {
      sub.col(static_cast<Eigen::Index>(i)) = dictionary.col(out.support[i]);
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(sub);
    if (qr.rank() < sub.cols()) {
      warn("SOMP support is rank deficient; refitting with the pseudoinverse");
      out.coefficients = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(sub).solve(data);
    } else {
      out.coefficients = qr.solve(data);
    }
    residual = data - sub * out.coefficients;
    out.residual_norms.push_back(residual.norm());
    ++out.map.iterations;
  }

  for (std::size_t i = 0; i < out.support.size(); ++i) {
    out.map.weights(out.support[i]) = out.coefficients.row(static_cast<Eigen::Index>(i)).norm();
  }
  out.map.converged = true;
  return out;
}

SparseMap somp_solve(const MatrixXd& data, const MatrixXd& dictionary, int n_atoms) {
  return somp(data, dictionary, n_atoms).map;
}

}  // namespace srpsbl
