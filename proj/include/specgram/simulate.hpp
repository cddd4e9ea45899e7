#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specgram/contour.hpp"
#include "specgram/fluct.hpp"
#include "specgram/profile.hpp"
#include "specgram/rng.hpp"

namespace specgram {

// ---------------------------------------------------------------- sampling

struct GramSample {
    Eigen::MatrixXcd S;           // p×p Gram matrix Y Y^*
    Eigen::VectorXd eigenvalues;  // ascending
    double mask_density = 0.0;    // observed fraction of kept entries
    std::uint64_t seed = 0;
    bool real_entries = false;
};

// One draw of the masked sample covariance model: entries
// y_ij = b_ij w_ij sigma_ij / sqrt(n s) with b ~ Bernoulli(s).  Entries are
// drawn in column-major order from a single stream, so a (profile, sparsity,
// model, seed) tuple pins the sample bit-for-bit.  Checks two invariants on
// the way out: trace/eigenvalue-sum agreement and the mask density staying
// within 5 standard deviations of s.
GramSample sample_gram(const VarianceProfile& profile, const SparsityConfig& sparsity,
                       const EntryModel& model, std::uint64_t seed);

// Eigenvalues of a Gram matrix: real symmetric input goes straight to the
// symmetric solver; complex Hermitian input goes through the doubled real
// embedding with pairing de-duplication.
Eigen::VectorXd eigenvalues(const Eigen::MatrixXd& S);
Eigen::VectorXd eigenvalues(const Eigen::MatrixXcd& S);

// Masked standardized vector x_k = b_k w_k sigma_k / sqrt(s) (the population
// of the quadratic-form limit below).
Eigen::VectorXcd sample_masked_vector(const Eigen::VectorXd& sigma2, double s,
                                      const EntryModel& model, std::mt19937_64& rng);

// Limit covariance of the centered quadratic forms x^* A x and x^* B x:
//   (kappa + 1) Tr(A Sigma B Sigma) + (nu4/s - kappa - 2) sum_k A_kk B_kk sigma2_k^2.
cplx quadratic_form_oracle(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B,
                           const Eigen::VectorXd& sigma2, const EntryModel& model, double s);

// ---------------------------------------------------------------- linear statistics

// Centering pieces of the linear spectral statistic, precomputed once per
// (profile, f, contour, sparsity, model) and reused across replications.
struct LssCentering {
    double f_dpi = 0.0;       // \int f d pi_n
    double correction = 0.0;  // High-regime recentring term, 0 in Moderate
};
LssCentering lss_centering(const VarianceProfile& profile, const TestFunction& f,
                           const Contour& contour, const SparsityConfig& sparsity,
                           const EntryModel& model);

// sqrt(p) q [ (1/p) sum_i f(lambda_i) - \int f d pi_n ] + correction
double centered_lss(const VarianceProfile& profile, const GramSample& sample,
                    const TestFunction& f, const Contour& contour,
                    const SparsityConfig& sparsity, const EntryModel& model);
double centered_lss_given(const GramSample& sample, const TestFunction& f,
                          const SparsityConfig& sparsity, int p, const LssCentering& centering);

// ---------------------------------------------------------------- Monte Carlo battery

struct McBatteryResult {
    std::vector<double> stats;  // one centered statistic per replication
    std::int64_t replications = 0;
    std::string statistic_name;
    double mean = 0.0;
    double se_mean = 0.0;
    double var = 0.0;
    double mean_theory = 0.0;   // limit mean of the centered statistic
    double var_theory = 0.0;    // limit variance of the centered statistic
    double ks_empirical = 0.0;  // KS to normal after empirical standardization
    double ks_theory = 0.0;     // KS to normal after theory standardization
    std::uint64_t seed = 0;
};

// Replicated centered linear spectral statistics.  Replication r draws from
// stream r+1 of the master seed, so results are independent of thread count
// and schedule.  f(x) = x avoids the eigendecomposition via the trace;
// f = log1p_scaled goes through a Cholesky log-determinant; anything else
// pays for eigenvalues.
McBatteryResult mc_battery(const VarianceProfile& profile, const SparsityConfig& sparsity,
                           const EntryModel& model, const TestFunction& f,
                           const Contour& contour, std::int64_t replications,
                           std::uint64_t seed);

}  // namespace specgram
