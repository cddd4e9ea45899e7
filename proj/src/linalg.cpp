#include "specgram/linalg.hpp"

#include <cmath>
#include <string>

#include "specgram/errors.hpp"

#define LAPACK_COMPLEX_CPP
#include <lapacke.h>

namespace specgram {

namespace {

constexpr double kSymTol = 1e-8;

void check_square(Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (rows != cols) throw ValidationError(std::string(what) + ": matrix must be square");
}

double scale_of(double max_abs) { return std::max(1.0, max_abs); }

void check_symmetric(const Eigen::MatrixXd& M, const char* what) {
    check_square(M.rows(), M.cols(), what);
    if (M.size() == 0) return;
    double dev = (M - M.transpose()).cwiseAbs().maxCoeff();
    if (dev > kSymTol * scale_of(M.cwiseAbs().maxCoeff()))
        throw ValidationError(std::string(what) + ": matrix is not symmetric");
}

void check_hermitian(const Eigen::MatrixXcd& M, const char* what) {
    check_square(M.rows(), M.cols(), what);
    if (M.size() == 0) return;
    double dev = (M - M.adjoint()).cwiseAbs().maxCoeff();
    if (dev > kSymTol * scale_of(M.cwiseAbs().maxCoeff()))
        throw ValidationError(std::string(what) + ": matrix is not Hermitian");
}

Eigen::VectorXd dsyevd_values(Eigen::MatrixXd M, const char* what) {
    const auto n = static_cast<lapack_int>(M.rows());
    Eigen::VectorXd w(n);
    if (n == 0) return w;
    lapack_int info =
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', n, M.data(), n, w.data());
    if (info != 0)
        throw NumericalError(std::string(what) + ": eigenvalue computation failed (info " +
                             std::to_string(info) + ")");
    return w;
}

}  // namespace

Eigen::VectorXd eig_sym_real(const Eigen::MatrixXd& M) {
    check_symmetric(M, "eig_sym_real");
    return dsyevd_values(M, "eig_sym_real");
}

Eigen::VectorXd eig_herm_complex(const Eigen::MatrixXcd& M) {
    check_hermitian(M, "eig_herm_complex");
    const Eigen::Index p = M.rows();
    Eigen::MatrixXd E(2 * p, 2 * p);
    E.topLeftCorner(p, p) = M.real();
    E.bottomRightCorner(p, p) = M.real();
    E.topRightCorner(p, p) = -M.imag();
    E.bottomLeftCorner(p, p) = M.imag();
    Eigen::VectorXd w = dsyevd_values(std::move(E), "eig_herm_complex");
    Eigen::VectorXd out(p);
    for (Eigen::Index k = 0; k < p; ++k) out[k] = w[2 * k];  // each value appears twice
    return out;
}

double logdet_hermitian_pd(const Eigen::MatrixXcd& M) {
    check_hermitian(M, "logdet_hermitian_pd");
    Eigen::MatrixXcd L = M;
    const auto n = static_cast<lapack_int>(M.rows());
    if (n == 0) return 0.0;
    lapack_int info = LAPACKE_zpotrf(LAPACK_COL_MAJOR, 'L', n,
                                     reinterpret_cast<lapack_complex_double*>(L.data()), n);
    if (info != 0)
        throw NumericalError("logdet_hermitian_pd: matrix is not positive definite (info " +
                             std::to_string(info) + ")");
    double acc = 0.0;
    for (lapack_int k = 0; k < n; ++k) acc += std::log(L(k, k).real());
    return 2.0 * acc;
}

double logdet_spd(const Eigen::MatrixXd& M) {
    check_symmetric(M, "logdet_spd");
    Eigen::MatrixXd L = M;
    const auto n = static_cast<lapack_int>(M.rows());
    if (n == 0) return 0.0;
    lapack_int info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, L.data(), n);
    if (info != 0)
        throw NumericalError("logdet_spd: matrix is not positive definite (info " +
                             std::to_string(info) + ")");
    double acc = 0.0;
    for (lapack_int k = 0; k < n; ++k) acc += std::log(L(k, k));
    return 2.0 * acc;
}

}  // namespace specgram
