#pragma once

#include <optional>
#include <random>

#include "specgram/profile.hpp"

namespace specgram {

using cplx = std::complex<double>;

// ---------------------------------------------------------------- channel model

// One masked fading channel H (N_r × N_t): h_ij = b_ij l_j g_ij / sqrt(N_t s)
// with b ~ Bernoulli(s), g a standardized entry draw, and l_j the per-antenna
// fading amplitude.  Column j then has entry variance l_j^2 / N_t.
Eigen::MatrixXcd sample_channel(int n_r, const Eigen::VectorXd& l, double s,
                                const EntryModel& model, std::mt19937_64& rng);

// ---------------------------------------------------------------- trace equality test

struct EqualityTest {
    double stat = 0.0;         // D = (q_hat / sqrt(N_r)) (Tr H1 H1* - Tr H2 H2*)
    double t = 0.0;            // D / (sqrt(2) sigma_null_hat)
    double threshold = 0.0;    // one-sided normal quantile at level alpha
    bool reject = false;
    double s_hat = 0.0;        // mask density estimate (from H1's exact zeros)
    double q_hat = 0.0;        // sqrt(s_hat N_t)
    double sigma2_null = 0.0;  // estimated single-channel variance of the scaled trace
};

// One-sided test of equal aggregate channel power.  The sparsity level is
// estimated from the exact-zero pattern of H1 unless known_s is supplied.
// The variance estimate uses the fourth absolute moments of H1's entries;
// the s_hat^2 term keeps it consistent when entries are masked.
EqualityTest equality_test(const Eigen::MatrixXcd& H1, const Eigen::MatrixXcd& H2, double alpha,
                           const EntryModel& model, std::optional<double> known_s = std::nullopt);

// Gaussian-limit power of the one-sided test at level alpha when the two
// channels have per-antenna fading l1 and l2 (null calibrated on l1's law):
// 1 - Phi( (sqrt(2) z_{1-alpha} sigma_0 - shift) / sigma_1 ).  Reduces to
// alpha exactly when l1 == l2.
double predicted_power(const Eigen::VectorXd& l1, const Eigen::VectorXd& l2, int n_r, double s,
                       double alpha, const EntryModel& model);

// ---------------------------------------------------------------- mutual information

// log det(I + H H^* / sigma2)
double mutual_information(const Eigen::MatrixXcd& H, double sigma2);

// Deterministic equivalent and Gaussian fluctuation parameters of the mutual
// information at noise level sigma2, from the two-scalar fixed point of the
// column-variance profile l_j^2 / N_t.
struct MiCltParams {
    double V = 0.0;      // deterministic equivalent of log det(I + H H^*/sigma2)
    double mu = 0.0;     // mean of q/sqrt(N_r) (I_n - V)
    double sigma = 0.0;  // standard deviation of the same statistic
    double delta = 0.0;         // receive-side scalar
    double delta_tilde = 0.0;   // transmit-side scalar
};
MiCltParams mi_clt_params(const Eigen::VectorXd& l, int n_r, double sigma2,
                          const SparsityConfig& sparsity, const EntryModel& model);

// Same fluctuation parameters for a general separable weight pair: entry
// variances d_i d_tilde_j / N_t.  The amplitude overload above is the special
// case d = 1, d_tilde = l^2.
MiCltParams mi_clt_params_weighted(const Eigen::VectorXd& d, const Eigen::VectorXd& d_tilde,
                                   double sigma2, const SparsityConfig& sparsity,
                                   const EntryModel& model);

// Standardized statistic ( q/sqrt(N_r) (mi - V) - mu ) / sigma.
double mi_t_statistic(const MiCltParams& params, double mi, int n_r, double q);

// P( I_n < rate ) under the Gaussian limit.
double outage_probability(const MiCltParams& params, double rate, int n_r, double q);

}  // namespace specgram
