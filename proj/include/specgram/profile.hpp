#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "specgram/errors.hpp"

namespace specgram {

// ---------------------------------------------------------------- profile

// Entry-variance profile of the p×n data matrix.  sigma2(i,j) is the
// variance of entry (i,j).  A profile constructed from separable factors
// (sigma2(i,j) = d(i)*d_tilde(j)) keeps the factors around; several
// downstream kernels have O(p+n) evaluation paths in that case.
struct VarianceProfile {
    int p = 0, n = 0;
    Eigen::MatrixXd sigma2;  // p×n, dense, row i = variances of data row i
    double c = 0.0;          // aspect ratio p/n

    bool separable = false;
    Eigen::VectorXd d;        // length p (only when separable)
    Eigen::VectorXd d_tilde;  // length n (only when separable)

    // Construction never silently repairs anything: negative variances are
    // rejected outright; bound diagnostics are reported by validate_profile.
    static VarianceProfile dense(Eigen::MatrixXd sigma2);
    static VarianceProfile constant(int p, int n, double value);

    double sigma2_max() const { return s2max_; }
    double sigma2_min_colmean() const { return s2min_colmean_; }

    // cached on construction
    double s2max_ = 0.0;
    double s2min_colmean_ = 0.0;
};

VarianceProfile make_separable_profile(const Eigen::VectorXd& d,
                                       const Eigen::VectorXd& d_tilde);

struct ProfileDiagnostics {
    double sigma2_max;
    double sigma2_min_colmean;
    bool ok;
};

// Checks the two standing bounds: entries bounded above, column means
// bounded away from zero.  Reports, never throws.
ProfileDiagnostics validate_profile(const VarianceProfile& profile);

// ---------------------------------------------------------------- sparsity

enum class Regime { Moderate, High };

// Bernoulli mask configuration: each entry is kept with probability
// s = q^2/n.  Moderate treats s as a fixed constant; High treats it as
// vanishing (q well below sqrt(n)) and selects the reduced kernels.
struct SparsityConfig {
    double q = 0.0;
    double s = 1.0;    // retention probability q^2/n
    double phi = 0.5;  // exponent with q = n^phi (recorded for reporting)
    Regime regime = Regime::Moderate;

    static SparsityConfig from_q(double q, int n, Regime regime);
    static SparsityConfig from_s(double s, int n, Regime regime);
};

// ---------------------------------------------------------------- entries

enum class EntryKind { RealGaussian, ComplexGaussian, ShiftedGamma, Custom };

// Distribution of the (standardized) matrix entries.  kappa is 1 for real
// entries and 0 for complex entries with E w^2 = 0; nu4 is the standardized
// fourth absolute moment E|w|^4 at unit variance.
struct EntryModel {
    EntryKind kind = EntryKind::ComplexGaussian;
    int kappa = 0;
    double nu4 = 2.0;
    double gamma_shape = 2.0, gamma_scale = 1.0;  // ShiftedGamma parameters
    std::function<double(std::mt19937_64&)> sampler;  // Custom: standardized real draw
    // Custom complex variant; takes precedence over `sampler` when set.
    std::function<std::complex<double>(std::mt19937_64&)> complex_sampler;
    std::string name = "complex-gaussian";

    static EntryModel real_gaussian();
    static EntryModel complex_gaussian();
    // (Gamma(shape, scale) - shape*scale)/sqrt(shape*scale^2): mean 0, var 1.
    static EntryModel shifted_gamma(double shape, double scale);
    // Custom samplers must already be standardized and must declare kappa;
    // nu4 is estimated by sampling when requested.
    static EntryModel custom(std::function<double(std::mt19937_64&)> sampler, int kappa,
                             std::string name = "custom");
    // Complex custom draw (unit variance, E w^2 = 0 expected); kappa = 0.
    static EntryModel custom_complex(std::function<std::complex<double>(std::mt19937_64&)> sampler,
                                     std::string name = "custom-complex");
};

// Standardized fourth moment of the entry law.  Closed form for the
// built-ins; Monte Carlo for Custom (reps draws, reported with its s.e.).
struct FourthMoment {
    double value;
    double se;  // 0 for closed forms
};
FourthMoment standardized_fourth_moment_mc(const EntryModel& model,
                                           std::int64_t reps = 10000000,
                                           std::uint64_t seed = 1);
double standardized_fourth_moment(const EntryModel& model);

// One standardized entry draw (unit variance; imaginary part 0 for real
// models, (g1 + i g2)/sqrt(2) for complex Gaussian).
std::complex<double> draw_entry(const EntryModel& model, std::mt19937_64& rng);

}  // namespace specgram
