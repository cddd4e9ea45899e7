#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "specgram/profile.hpp"

namespace specgram {

using cplx = std::complex<double>;

// ---------------------------------------------------------------- canonical system

// Solution of the coupled fixed point
//   t_i  = -1 / ( z [ 1 + (1/n) sum_j sigma2_ij tt_j ] ),   i = 1..p
//   tt_j = -1 / ( z [ 1 + (1/n) sum_i sigma2_ij t_i  ] ),   j = 1..n
// at a spectral argument z off the positive real axis.  When Im z > 0 the
// solution lies in the upper half plane componentwise.
struct DetEquivalent {
    cplx z;
    Eigen::VectorXcd t;        // length p
    Eigen::VectorXcd t_tilde;  // length n
    double residual = 0.0;     // sup-norm fixed-point defect at return
    int iterations = 0;        // total sweep count (including continuation)
};

// Jacobi-style sweeps with safeguarded vector-Aitken extrapolation; spectral
// arguments close to the positive axis (|Im z| < 0.05, Re z >= 0) are reached
// by a geometric continuation ladder in Im z with warm starts.  Throws
// DomainError for z on the positive real axis, IterationError on stall.
DetEquivalent solve_canonical_system(const VarianceProfile& profile, cplx z,
                                     double tol = 1e-12, int max_iter = 10000);

struct StieltjesPair {
    cplx m0;        // (1/p) sum_i t_i
    cplx m0_under;  // (1/n) sum_j tt_j
};
StieltjesPair stieltjes_m0(const DetEquivalent& det);

// Density of the deterministic spectral measure by Stieltjes inversion at
// height eta: (1/pi) Im m0(x + i eta).  Separably-factored profiles use the
// scalar fixed point per grid point (same solution, O(p+n) per sweep); the
// two paths agree to solver tolerance and are cross-checked in the tests.
Eigen::VectorXd lsd_density(const VarianceProfile& profile,
                            const Eigen::VectorXd& x_grid, double eta);

// High-probability upper edge: sigma2_max * (1 + sqrt(c))^2.
double spectral_support_bound(const VarianceProfile& profile);

// ---------------------------------------------------------------- scalar system

// Scalar deterministic equivalent for separable variance profiles
// d (length N_r) x d_tilde (length N_t), used by the mutual-information
// analysis.  Normalization: delta = (1/N_t) sum_i d_i t_i,
// delta_tilde = (1/N_t) sum_j dt_j tt_j, with
// t_i = -1/(z (1 + d_i delta_tilde)), tt_j = -1/(z (1 + dt_j delta)).
struct ScalarMiEquivalent {
    cplx z;
    cplx delta;
    cplx delta_tilde;
    Eigen::VectorXcd t_diag;        // length N_r
    Eigen::VectorXcd t_tilde_diag;  // length N_t
    double residual = 0.0;
    int iterations = 0;
};

ScalarMiEquivalent solve_scalar_mi_system(const Eigen::VectorXd& d,
                                          const Eigen::VectorXd& d_tilde, cplx z,
                                          double tol = 1e-12, int max_iter = 20000);

}  // namespace specgram
