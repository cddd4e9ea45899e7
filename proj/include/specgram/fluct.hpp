#pragma once

#include <optional>

#include "specgram/contour.hpp"
#include "specgram/detequiv.hpp"

namespace specgram {

// ---------------------------------------------------------------- coefficient systems

// n×n coupling coefficients a_lm(z1,z2).  As printed, both denominator
// factors are indexed by the row l; `alt_reading` switches the second factor
// to the column index m for comparison (the two readings are related by a
// diagonal similarity, so every similarity-invariant downstream quantity
// agrees; the test suite pins this).
Eigen::MatrixXcd a_matrix(const VarianceProfile& profile, const DetEquivalent& det1,
                          const DetEquivalent& det2, bool alt_reading = false);

struct USystems {
    Eigen::VectorXcd U;        // length n
    Eigen::VectorXcd U_tilde;  // length p
};

// Solves the per-excluded-index linear systems for U_j and U_tilde_i at the
// argument of `det`.  The production path solves (I - A) W = A once and reads
// all n answers off the diagonal (exclusion of index j is a rank-one update);
// the reference path solves one dense system per index, as the systems are
// stated, and is kept for cross-checking.
USystems solve_u_systems(const VarianceProfile& profile, const DetEquivalent& det);
USystems solve_u_systems_reference(const VarianceProfile& profile, const DetEquivalent& det);

// Source vector theta_j for the mean system.  Moderate: full three-block
// form (fourth-moment block plus the kappa/U and Hadamard-trace blocks);
// High: fourth-moment block only.  `u` may supply precomputed U-systems;
// when absent and needed they are solved internally.
Eigen::VectorXcd theta_sources(const VarianceProfile& profile, const DetEquivalent& det,
                               const SparsityConfig& sparsity, const EntryModel& model,
                               const USystems* u = nullptr);

// Mean kernel E(z) = (1/n) sum_j psi_j with (I - A(z,z)) psi = theta.
cplx mean_kernel(const VarianceProfile& profile, cplx z, const SparsityConfig& sparsity,
                 const EntryModel& model);

// Covariance kernel G(z1,z2) prior to the derivative transfer:
//   s(kappa+1)/p * sum_j H_jj
//   + (nu4 - kappa s - 2 s)/(p n) * sum_j tt_j(z1) tt_j(z2) Tr[T1(z1)∘T1(z2)∘Sigma_j^2]
// with the High regime keeping only the nu4 part.  H_jj comes from the
// triangular system through the diagonal pivots of the unpivoted LU of
// (I - A): the k-th pivot is the Schur complement of the leading block,
// giving H_jj = n (1 - pivot_j) without per-j solves.
cplx cov_kernel_G(const VarianceProfile& profile, cplx z1, cplx z2,
                  const SparsityConfig& sparsity, const EntryModel& model,
                  bool alt_reading = false);

// ---------------------------------------------------------------- contour integrals

struct QuadratureDiagnostics {
    int nodes_per_edge = 0;        // coarse resolution m (result uses 2m)
    double rel_change_on_doubling = 0.0;
    bool accuracy_warning = false;  // set when the change exceeds 1e-6 relative
};

// Integral of f against the deterministic spectral measure pi_n,
// evaluated as -(1/pi) Im of the upper-contour quadrature of f * m0.
double lsd_integral(const VarianceProfile& profile, const std::function<cplx(cplx)>& f,
                    const Contour& contour);

// CLT mean -(1/2 pi i) \oint f E dz of the centered statistic.  In the High
// regime the corrected statistic is centered, so the mean is 0 by definition.
double clt_mean(const VarianceProfile& profile, const TestFunction& f, const Contour& contour,
                const SparsityConfig& sparsity, const EntryModel& model,
                QuadratureDiagnostics* diag = nullptr);

// CLT covariance -(1/4 pi^2) \oint\oint f'(z1) g'(z2) G(z1,z2) dz1 dz2.
// The covariance kernel is naturally a second derivative d^2 G / dz1 dz2;
// it is transferred to the test functions by two integrations by parts
// around closed contours, so only G itself is evaluated here.
double clt_cov(const VarianceProfile& profile, const TestFunction& f, const TestFunction& g,
               const Contour& contour1, const Contour& contour2, const SparsityConfig& sparsity,
               const EntryModel& model, QuadratureDiagnostics* diag = nullptr);

// Same integral without the derivative transfer: d^2 G / dz1 dz2 by central
// finite differences (step h), integrated against f g.  Exists to
// property-check the integration-by-parts equivalence at small sizes.
double clt_cov_fd(const VarianceProfile& profile, const TestFunction& f, const TestFunction& g,
                  const Contour& contour1, const Contour& contour2,
                  const SparsityConfig& sparsity, const EntryModel& model, double h = 1e-4);

// Additive recentring term of the high-sparsity corrected statistic:
// +(1/2 pi i) \oint f E dz with the High-regime (fourth-moment-only) kernel.
// Requires sparsity.regime == High.
double corrected_centering(const VarianceProfile& profile, const TestFunction& f,
                           const Contour& contour, const SparsityConfig& sparsity,
                           const EntryModel& model);

// ---------------------------------------------------------------- cached quadratures

// Mean-kernel quadrature with the model-independent pieces cached per node:
// theta decomposes as coefB * B + coefC1 * C1 where only the coefficients
// depend on (q, nu4, kappa, regime), so one node sweep serves any number of
// sparsity/model combinations.
class MeanQuadrature {
  public:
    MeanQuadrature(const VarianceProfile& profile, const Contour& contour);
    // -(1/2 pi i) \oint f E dz at the fine (2m) resolution
    double integral(const TestFunction& f, const SparsityConfig& sparsity,
                    const EntryModel& model, QuadratureDiagnostics* diag = nullptr) const;

  private:
    std::vector<ContourNode> nodes_;  // upper contour at 2m
    std::vector<cplx> psiB_, psiC1_;  // per-node means of (I-A)^{-1} B, (I-A)^{-1} C1
    std::vector<std::size_t> coarse_idx_;  // positions of the m-grid nodes
    std::vector<cplx> coarse_w_;           // their m-grid weights
    int m_ = 0;
    double p_ = 0.0, n_ = 0.0;
};

// Covariance quadrature with the kernel pieces (sum_H, term2) cached per
// node pair; evaluation for a given (f, g, sparsity, model) is a weighted
// bilinear form over the cache.
class CovQuadrature {
  public:
    CovQuadrature(const VarianceProfile& profile, const Contour& contour1,
                  const Contour& contour2, bool alt_reading = false);
    double evaluate(const TestFunction& f, const TestFunction& g,
                    const SparsityConfig& sparsity, const EntryModel& model,
                    QuadratureDiagnostics* diag = nullptr) const;

  private:
    std::vector<ContourNode> outer_;  // full contour1 at 2m
    std::vector<ContourNode> inner_;  // upper contour2 at 2m
    std::vector<std::size_t> outer_coarse_, inner_coarse_;
    std::vector<cplx> outer_coarse_w_, inner_coarse_w_;
    Eigen::MatrixXcd sum_H_;          // |outer| × |inner|
    Eigen::MatrixXcd term2_;          // |outer| × |inner|
    int m_ = 0;
    double p_ = 0.0, n_ = 0.0;
};

}  // namespace specgram
