#pragma once

#include <Eigen/Dense>
#include <complex>

namespace specgram {

// Eigenvalues (ascending) of a real symmetric matrix.  Rejects visibly
// non-symmetric input instead of symmetrizing it.
Eigen::VectorXd eig_sym_real(const Eigen::MatrixXd& M);

// Eigenvalues (ascending) of a complex Hermitian matrix via the real
// symmetric 2p×2p embedding [[Re, -Im], [Im, Re]], whose spectrum is the
// Hermitian spectrum with every eigenvalue doubled; the duplicates are
// removed by pairing consecutive entries of the sorted output.
Eigen::VectorXd eig_herm_complex(const Eigen::MatrixXcd& M);

// log determinant of a Hermitian / symmetric positive definite matrix by
// Cholesky; throws NumericalError when the factorization breaks down.
double logdet_hermitian_pd(const Eigen::MatrixXcd& M);
double logdet_spd(const Eigen::MatrixXd& M);

}  // namespace specgram
