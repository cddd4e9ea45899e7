#include "specgram/simulate.hpp"

#include <cmath>

#include "specgram/linalg.hpp"
#include "specgram/stats.hpp"

namespace specgram {

namespace {

bool is_real_model(const EntryModel& model) {
    if (model.kind == EntryKind::ComplexGaussian) return false;
    if (model.kind == EntryKind::Custom && model.complex_sampler) return false;
    return true;
}

// column-major entry sweep shared by the real and complex samplers
template <typename Scalar, typename Fill>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> draw_matrix(
    const VarianceProfile& profile, const SparsityConfig& sparsity, const EntryModel& model,
    std::mt19937_64& rng, double* density, Fill fill) {
    const int p = profile.p, n = profile.n;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n) * sparsity.s);
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> Y(p, n);
    std::bernoulli_distribution keep(sparsity.s);
    std::int64_t kept = 0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < p; ++i) {
            if (keep(rng)) {
                ++kept;
                Y(i, j) = fill(draw_entry(model, rng)) *
                          (std::sqrt(profile.sigma2(i, j)) * scale);
            } else {
                Y(i, j) = Scalar(0);
            }
        }
    }
    if (density)
        *density = static_cast<double>(kept) / (static_cast<double>(p) * static_cast<double>(n));
    return Y;
}

Eigen::MatrixXd draw_Y_real(const VarianceProfile& profile, const SparsityConfig& sparsity,
                            const EntryModel& model, std::mt19937_64& rng, double* density) {
    return draw_matrix<double>(profile, sparsity, model, rng, density,
                               [](cplx w) { return w.real(); });
}

Eigen::MatrixXcd draw_Y_complex(const VarianceProfile& profile, const SparsityConfig& sparsity,
                                const EntryModel& model, std::mt19937_64& rng, double* density) {
    return draw_matrix<cplx>(profile, sparsity, model, rng, density, [](cplx w) { return w; });
}

void check_mask_density(double density, double s, std::int64_t cells) {
    if (s >= 1.0 - 1e-12) return;  // everything kept, nothing random to check
    double sd = std::sqrt(s * (1.0 - s) / static_cast<double>(cells));
    if (std::abs(density - s) > 5.0 * sd)
        throw NumericalError("sample_gram: mask density " + std::to_string(density) +
                             " implausible for s = " + std::to_string(s));
}

void check_trace(double trace, const Eigen::VectorXd& lambda) {
    double lsum = lambda.sum();
    if (std::abs(trace - lsum) > 1e-8 * std::max(1.0, std::abs(trace)))
        throw NumericalError("sample_gram: trace/eigenvalue-sum mismatch");
}

// logdet-based fast path applies to f(x) = log(1 + x/sigma2)
bool logdet_applicable(const TestFunction& f, double* sigma2) {
    if (f.name.rfind("log1p_scaled", 0) != 0) return false;
    if (!std::isfinite(f.real_singularity) || f.real_singularity >= 0.0) return false;
    *sigma2 = -f.real_singularity;
    return true;
}

double sum_f_over(const Eigen::VectorXd& lambda, const TestFunction& f) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) acc += f.value(cplx(lambda[i], 0.0)).real();
    return acc;
}

}  // namespace

// ---------------------------------------------------------------- sampling

GramSample sample_gram(const VarianceProfile& profile, const SparsityConfig& sparsity,
                       const EntryModel& model, std::uint64_t seed) {
    GramSample out;
    out.seed = seed;
    out.real_entries = is_real_model(model);
    std::mt19937_64 rng = make_stream(seed, 0);
    if (out.real_entries) {
        Eigen::MatrixXd Y = draw_Y_real(profile, sparsity, model, rng, &out.mask_density);
        Eigen::MatrixXd S = Y * Y.transpose();
        out.eigenvalues = eigenvalues(S);
        check_trace(S.trace(), out.eigenvalues);
        out.S = S.cast<cplx>();
    } else {
        Eigen::MatrixXcd Y = draw_Y_complex(profile, sparsity, model, rng, &out.mask_density);
        Eigen::MatrixXcd S = Y * Y.adjoint();
        out.eigenvalues = eigenvalues(S);
        check_trace(S.trace().real(), out.eigenvalues);
        out.S = std::move(S);
    }
    check_mask_density(out.mask_density, sparsity.s,
                       static_cast<std::int64_t>(profile.p) * profile.n);
    return out;
}

Eigen::VectorXd eigenvalues(const Eigen::MatrixXd& S) { return eig_sym_real(S); }

Eigen::VectorXd eigenvalues(const Eigen::MatrixXcd& S) { return eig_herm_complex(S); }

Eigen::VectorXcd sample_masked_vector(const Eigen::VectorXd& sigma2, double s,
                                      const EntryModel& model, std::mt19937_64& rng) {
    if (!(s > 0.0) || s > 1.0 + 1e-12)
        throw ValidationError("sample_masked_vector: s must lie in (0, 1]");
    Eigen::VectorXcd x(sigma2.size());
    std::bernoulli_distribution keep(s);
    const double inv_root_s = 1.0 / std::sqrt(s);
    for (Eigen::Index k = 0; k < sigma2.size(); ++k) {
        if (sigma2[k] < 0.0)
            throw ValidationError("sample_masked_vector: negative variance entry");
        x[k] = keep(rng) ? draw_entry(model, rng) * (std::sqrt(sigma2[k]) * inv_root_s)
                         : cplx(0.0, 0.0);
    }
    return x;
}

cplx quadratic_form_oracle(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B,
                           const Eigen::VectorXd& sigma2, const EntryModel& model, double s) {
    const Eigen::Index p = sigma2.size();
    if (A.rows() != p || A.cols() != p || B.rows() != p || B.cols() != p)
        throw ValidationError("quadratic_form_oracle: shape mismatch");
    if (!(s > 0.0) || s > 1.0 + 1e-12)
        throw ValidationError("quadratic_form_oracle: s must lie in (0, 1]");
    if (model.kappa != 0 && model.kappa != 1)
        throw ValidationError("quadratic_form_oracle: kappa must be 0 or 1");
    if (!(model.nu4 >= 1.0))
        throw ValidationError("quadratic_form_oracle: fourth moment not set");
    Eigen::VectorXcd s2 = sigma2.cast<cplx>();
    Eigen::MatrixXcd M1 = A * s2.asDiagonal();
    Eigen::MatrixXcd M2 = B * s2.asDiagonal();
    cplx tr = (M1.array() * M2.transpose().array()).sum();
    cplx had(0.0, 0.0);
    for (Eigen::Index k = 0; k < p; ++k) had += A(k, k) * B(k, k) * sigma2[k] * sigma2[k];
    return (model.kappa + 1.0) * tr + (model.nu4 / s - model.kappa - 2.0) * had;
}

// ---------------------------------------------------------------- linear statistics

LssCentering lss_centering(const VarianceProfile& profile, const TestFunction& f,
                           const Contour& contour, const SparsityConfig& sparsity,
                           const EntryModel& model) {
    LssCentering c;
    c.f_dpi = lsd_integral(profile, f.value, contour);
    c.correction = (sparsity.regime == Regime::High)
                       ? corrected_centering(profile, f, contour, sparsity, model)
                       : 0.0;
    return c;
}

double centered_lss_given(const GramSample& sample, const TestFunction& f,
                          const SparsityConfig& sparsity, int p, const LssCentering& centering) {
    if (sample.eigenvalues.size() != p)
        throw ValidationError("centered_lss: eigenvalue count does not match p");
    const double pd = static_cast<double>(p);
    double mean_f = sum_f_over(sample.eigenvalues, f) / pd;
    return std::sqrt(pd) * sparsity.q * (mean_f - centering.f_dpi) + centering.correction;
}

double centered_lss(const VarianceProfile& profile, const GramSample& sample,
                    const TestFunction& f, const Contour& contour,
                    const SparsityConfig& sparsity, const EntryModel& model) {
    LssCentering c = lss_centering(profile, f, contour, sparsity, model);
    return centered_lss_given(sample, f, sparsity, profile.p, c);
}

// ---------------------------------------------------------------- Monte Carlo battery

McBatteryResult mc_battery(const VarianceProfile& profile, const SparsityConfig& sparsity,
                           const EntryModel& model, const TestFunction& f,
                           const Contour& contour, std::int64_t replications,
                           std::uint64_t seed) {
    if (replications < 2) throw ValidationError("mc_battery: need at least 2 replications");
    validate_test_function(f, contour);
    const LssCentering centering = lss_centering(profile, f, contour, sparsity, model);

    // Limit mean/variance used for the theory-standardized KS distance.  Two
    // contour quadratures; cheap for constant/separable profiles.
    const double mean_theory = clt_mean(profile, f, contour, sparsity, model);
    const double var_theory =
        clt_cov(profile, f, f, contour, dilate(contour, 1.15), sparsity, model);

    const int p = profile.p;
    const double pd = static_cast<double>(p);
    const bool real_entries = is_real_model(model);
    const bool trace_path = (f.name == "x");
    double sigma2_f = 0.0;
    const bool logdet_path = !trace_path && logdet_applicable(f, &sigma2_f);

    McBatteryResult out;
    out.replications = replications;
    out.seed = seed;
    out.statistic_name = "centered_lss[" + f.name + "]";
    out.stats.assign(static_cast<std::size_t>(replications), 0.0);

    std::vector<std::string> errs(static_cast<std::size_t>(replications));
    parallel_for(static_cast<std::size_t>(replications), [&](std::size_t r) {
        try {
            std::mt19937_64 rng = make_stream(seed, r + 1);
            double sum_f = 0.0;
            if (real_entries) {
                Eigen::MatrixXd Y = draw_Y_real(profile, sparsity, model, rng, nullptr);
                if (trace_path) {
                    sum_f = Y.squaredNorm();
                } else {
                    Eigen::MatrixXd S = Y * Y.transpose();
                    if (logdet_path)
                        sum_f = logdet_spd(Eigen::MatrixXd(
                                    Eigen::MatrixXd::Identity(p, p) + S / sigma2_f));
                    else
                        sum_f = sum_f_over(eigenvalues(S), f);
                }
            } else {
                Eigen::MatrixXcd Y = draw_Y_complex(profile, sparsity, model, rng, nullptr);
                if (trace_path) {
                    sum_f = Y.squaredNorm();
                } else {
                    Eigen::MatrixXcd S = Y * Y.adjoint();
                    if (logdet_path)
                        sum_f = logdet_hermitian_pd(Eigen::MatrixXcd(
                                    Eigen::MatrixXcd::Identity(p, p) + S / sigma2_f));
                    else
                        sum_f = sum_f_over(eigenvalues(S), f);
                }
            }
            out.stats[r] = std::sqrt(pd) * sparsity.q * (sum_f / pd - centering.f_dpi) +
                           centering.correction;
        } catch (const std::exception& e) {
            errs[r] = e.what();
        }
    });
    for (std::size_t r = 0; r < errs.size(); ++r)
        if (!errs[r].empty())
            throw NumericalError("mc_battery: replication " + std::to_string(r) +
                                 " failed: " + errs[r]);

    MeanVar mv = mean_var(out.stats);
    out.mean = mv.mean;
    out.se_mean = mv.se_mean;
    out.var = mv.var;
    out.mean_theory = mean_theory;
    out.var_theory = var_theory;
    double sd = std::sqrt(mv.var);
    std::vector<double> standardized(out.stats.size());
    for (std::size_t r = 0; r < out.stats.size(); ++r)
        standardized[r] = (out.stats[r] - mv.mean) / sd;
    out.ks_empirical = ks_to_standard_normal(std::move(standardized));
    if (var_theory > 0.0) {
        double sd_theory = std::sqrt(var_theory);
        std::vector<double> th(out.stats.size());
        for (std::size_t r = 0; r < out.stats.size(); ++r)
            th[r] = (out.stats[r] - mean_theory) / sd_theory;
        out.ks_theory = ks_to_standard_normal(std::move(th));
    }
    return out;
}

}  // namespace specgram
