#include "specgram/profile.hpp"

#include <cmath>

#include "specgram/rng.hpp"
#include "specgram/stats.hpp"

namespace specgram {

namespace {

void finish_construction(VarianceProfile& v) {
    v.p = static_cast<int>(v.sigma2.rows());
    v.n = static_cast<int>(v.sigma2.cols());
    if (v.p < 1 || v.n < 1) throw ValidationError("profile: empty dimensions");
    if ((v.sigma2.array() < 0.0).any())
        throw ValidationError("profile: negative variance entry");
    v.c = static_cast<double>(v.p) / static_cast<double>(v.n);
    v.s2max_ = v.sigma2.maxCoeff();
    v.s2min_colmean_ = v.sigma2.colwise().mean().minCoeff();
}

}  // namespace

VarianceProfile VarianceProfile::dense(Eigen::MatrixXd sigma2) {
    VarianceProfile v;
    v.sigma2 = std::move(sigma2);
    finish_construction(v);
    return v;
}

VarianceProfile VarianceProfile::constant(int p, int n, double value) {
    if (value < 0.0) throw ValidationError("profile: negative variance");
    VarianceProfile v;
    v.sigma2 = Eigen::MatrixXd::Constant(p, n, value);
    finish_construction(v);
    if (value > 0.0) {
        v.separable = true;
        v.d = Eigen::VectorXd::Constant(p, value);
        v.d_tilde = Eigen::VectorXd::Ones(n);
    }
    return v;
}

VarianceProfile make_separable_profile(const Eigen::VectorXd& d,
                                       const Eigen::VectorXd& d_tilde) {
    if (d.size() < 1 || d_tilde.size() < 1)
        throw ValidationError("make_separable_profile: empty factor");
    if ((d.array() <= 0.0).any() || (d_tilde.array() <= 0.0).any())
        throw ValidationError("make_separable_profile: factors must be strictly positive");
    VarianceProfile v;
    v.sigma2 = d * d_tilde.transpose();
    finish_construction(v);
    v.separable = true;
    v.d = d;
    v.d_tilde = d_tilde;
    return v;
}

ProfileDiagnostics validate_profile(const VarianceProfile& profile) {
    ProfileDiagnostics diag{};
    diag.sigma2_max = profile.sigma2.maxCoeff();
    diag.sigma2_min_colmean = profile.sigma2.colwise().mean().minCoeff();
    diag.ok = std::isfinite(diag.sigma2_max) && diag.sigma2_min_colmean > 0.0;
    return diag;
}

// ---------------------------------------------------------------- sparsity

SparsityConfig SparsityConfig::from_q(double q, int n, Regime regime) {
    if (!(q > 0.0)) throw ValidationError("sparsity: q must be positive");
    if (n < 2) throw ValidationError("sparsity: n must be at least 2");
    SparsityConfig cfg;
    cfg.q = q;
    cfg.s = q * q / static_cast<double>(n);
    if (!(cfg.s > 0.0 && cfg.s <= 1.0 + 1e-12))
        throw ValidationError("sparsity: s = q^2/n outside (0,1]");
    cfg.s = std::min(cfg.s, 1.0);
    cfg.phi = std::log(q) / std::log(static_cast<double>(n));
    cfg.regime = regime;
    return cfg;
}

SparsityConfig SparsityConfig::from_s(double s, int n, Regime regime) {
    if (!(s > 0.0 && s <= 1.0)) throw ValidationError("sparsity: s outside (0,1]");
    return from_q(std::sqrt(s * static_cast<double>(n)), n, regime);
}

// ---------------------------------------------------------------- entries

EntryModel EntryModel::real_gaussian() {
    EntryModel m;
    m.kind = EntryKind::RealGaussian;
    m.kappa = 1;
    m.nu4 = 3.0;
    m.name = "real-gaussian";
    return m;
}

EntryModel EntryModel::complex_gaussian() {
    EntryModel m;
    m.kind = EntryKind::ComplexGaussian;
    m.kappa = 0;
    m.nu4 = 2.0;
    m.name = "complex-gaussian";
    return m;
}

EntryModel EntryModel::shifted_gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
        throw ValidationError("shifted_gamma: shape and scale must be positive");
    EntryModel m;
    m.kind = EntryKind::ShiftedGamma;
    m.kappa = 1;
    // standardized Gamma: excess kurtosis 6/shape
    m.nu4 = 3.0 + 6.0 / shape;
    m.gamma_shape = shape;
    m.gamma_scale = scale;
    m.name = "shifted-gamma";
    return m;
}

EntryModel EntryModel::custom(std::function<double(std::mt19937_64&)> sampler, int kappa,
                              std::string name) {
    if (kappa != 0 && kappa != 1) throw ValidationError("custom model: kappa must be 0 or 1");
    if (!sampler) throw ValidationError("custom model: empty sampler");
    EntryModel m;
    m.kind = EntryKind::Custom;
    m.kappa = kappa;
    m.nu4 = 0.0;  // unknown until estimated
    m.sampler = std::move(sampler);
    m.name = std::move(name);
    return m;
}

EntryModel EntryModel::custom_complex(
    std::function<std::complex<double>(std::mt19937_64&)> sampler, std::string name) {
    if (!sampler) throw ValidationError("custom model: empty sampler");
    EntryModel m;
    m.kind = EntryKind::Custom;
    m.kappa = 0;
    m.nu4 = 0.0;  // unknown until estimated
    m.complex_sampler = std::move(sampler);
    m.name = std::move(name);
    return m;
}

FourthMoment standardized_fourth_moment_mc(const EntryModel& model, std::int64_t reps,
                                           std::uint64_t seed) {
    auto rng = make_stream(seed, 0);
    double s2 = 0.0, s4 = 0.0, s8 = 0.0;
    for (std::int64_t i = 0; i < reps; ++i) {
        std::complex<double> w = draw_entry(model, rng);
        double a2 = std::norm(w);
        if (!std::isfinite(a2)) throw NumericalError("fourth moment: sampler returned non-finite value");
        double a4 = a2 * a2;
        s2 += a2;
        s4 += a4;
        s8 += a4 * a4;
    }
    double m2 = s2 / static_cast<double>(reps);
    double m4 = s4 / static_cast<double>(reps);
    double var4 = s8 / static_cast<double>(reps) - m4 * m4;
    double denom = m2 * m2;  // re-standardize in case the sampler is slightly off unit variance
    return {m4 / denom, std::sqrt(std::max(var4, 0.0) / static_cast<double>(reps)) / denom};
}

double standardized_fourth_moment(const EntryModel& model) {
    switch (model.kind) {
        case EntryKind::RealGaussian:
        case EntryKind::ComplexGaussian:
        case EntryKind::ShiftedGamma:
            return model.nu4;
        case EntryKind::Custom:
            return standardized_fourth_moment_mc(model).value;
    }
    throw ValidationError("unknown entry model");
}

std::complex<double> draw_entry(const EntryModel& model, std::mt19937_64& rng) {
    switch (model.kind) {
        case EntryKind::RealGaussian: {
            std::normal_distribution<double> g;
            return {g(rng), 0.0};
        }
        case EntryKind::ComplexGaussian: {
            std::normal_distribution<double> g;
            double re = g(rng), im = g(rng);
            return {re / std::sqrt(2.0), im / std::sqrt(2.0)};
        }
        case EntryKind::ShiftedGamma: {
            std::gamma_distribution<double> gam(model.gamma_shape, model.gamma_scale);
            double mean = model.gamma_shape * model.gamma_scale;
            double sd = std::sqrt(model.gamma_shape) * model.gamma_scale;
            return {(gam(rng) - mean) / sd, 0.0};
        }
        case EntryKind::Custom:
            if (model.complex_sampler) return model.complex_sampler(rng);
            return {model.sampler(rng), 0.0};
    }
    throw ValidationError("unknown entry model");
}

}  // namespace specgram
