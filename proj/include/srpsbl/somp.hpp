#ifndef SRPSBL_SOMP_HPP
#define SRPSBL_SOMP_HPP

#include <vector>

#include "srpsbl/msbl.hpp"

namespace srpsbl {

struct SompResult {
  SparseMap map;                       // row norms of the coefficients on the fine grid
  std::vector<int> support;            // selection order
  MatrixXd coefficients;               // |support| x measurement columns
  std::vector<double> residual_norms;  // Frobenius norm before and after each selection
};

/// Simultaneous orthogonal matching pursuit. Each step picks the atom with
/// the largest summed |correlation| (atoms scaled to unit norm) against the
/// residual of every measurement column, then refits all selected atoms by
/// least squares. Stops early once the residual vanishes.
SompResult somp(const MatrixXd& data, const MatrixXd& dictionary, int n_atoms);

SparseMap somp_solve(const MatrixXd& data, const MatrixXd& dictionary, int n_atoms);

}  // namespace srpsbl

#endif  // SRPSBL_SOMP_HPP
