#include "specgram/mimo.hpp"

#include <cmath>

#include "specgram/detequiv.hpp"
#include "specgram/linalg.hpp"
#include "specgram/stats.hpp"

namespace specgram {

namespace {

void check_s(double s, const char* what) {
    if (!(s > 0.0) || s > 1.0 + 1e-12)
        throw ValidationError(std::string(what) + ": s must lie in (0, 1]");
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw ValidationError("test level alpha must lie in (0, 1)");
}

void check_fading(const Eigen::VectorXd& l, const char* what) {
    if (l.size() == 0) throw ValidationError(std::string(what) + ": empty fading vector");
    if ((l.array() <= 0.0).any())
        throw ValidationError(std::string(what) + ": fading amplitudes must be positive");
}

void check_fading_nonneg(const Eigen::VectorXd& l, const char* what) {
    if (l.size() == 0) throw ValidationError(std::string(what) + ": empty fading vector");
    if ((l.array() < 0.0).any())
        throw ValidationError(std::string(what) + ": fading amplitudes must be nonnegative");
}

void check_moments(const EntryModel& model, const char* what) {
    if (model.kappa != 0 && model.kappa != 1)
        throw ValidationError(std::string(what) + ": kappa must be 0 or 1");
    if (!(model.nu4 >= 1.0))
        throw ValidationError(std::string(what) + ": fourth moment not set");
}

double sum_abs4(const Eigen::MatrixXcd& H) {
    return (H.array().abs2() * H.array().abs2()).sum();
}

}  // namespace

// ---------------------------------------------------------------- channel model

Eigen::MatrixXcd sample_channel(int n_r, const Eigen::VectorXd& l, double s,
                                const EntryModel& model, std::mt19937_64& rng) {
    if (n_r < 1) throw ValidationError("sample_channel: need at least one receive antenna");
    check_fading_nonneg(l, "sample_channel");
    check_s(s, "sample_channel");
    const int n_t = static_cast<int>(l.size());
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_t) * s);
    Eigen::MatrixXcd H(n_r, n_t);
    std::bernoulli_distribution keep(s);
    for (int j = 0; j < n_t; ++j) {
        const double col = l[j] * scale;
        for (int i = 0; i < n_r; ++i)
            H(i, j) = keep(rng) ? draw_entry(model, rng) * col : cplx(0.0, 0.0);
    }
    return H;
}

// ---------------------------------------------------------------- trace equality test

EqualityTest equality_test(const Eigen::MatrixXcd& H1, const Eigen::MatrixXcd& H2, double alpha,
                           const EntryModel& model, std::optional<double> known_s) {
    if (H1.rows() != H2.rows() || H1.cols() != H2.cols())
        throw ValidationError("equality_test: channel shapes differ");
    if (H1.rows() < 1 || H1.cols() < 1) throw ValidationError("equality_test: empty channels");
    check_alpha(alpha);
    check_moments(model, "equality_test");

    const double n_r = static_cast<double>(H1.rows());
    const double n_t = static_cast<double>(H1.cols());

    EqualityTest out;
    if (known_s) {
        check_s(*known_s, "equality_test");
        out.s_hat = *known_s;
    } else {
        std::int64_t nonzero = 0;
        for (Eigen::Index j = 0; j < H1.cols(); ++j)
            for (Eigen::Index i = 0; i < H1.rows(); ++i)
                if (H1(i, j) != cplx(0.0, 0.0)) ++nonzero;
        out.s_hat = static_cast<double>(nonzero) / (n_r * n_t);
        if (!(out.s_hat > 0.0))
            throw NumericalError("equality_test: H1 is entirely masked; cannot estimate s");
    }
    out.q_hat = std::sqrt(out.s_hat * n_t);

    const double tr1 = H1.squaredNorm(), tr2 = H2.squaredNorm();
    out.stat = out.q_hat / std::sqrt(n_r) * (tr1 - tr2);

    // sigma2_null = (nu4 - s)/N_t * sum_j l_j^4, with sum l^4 estimated from
    // the entry fourth moments: sum l^4 = N_t^2 s / (N_r nu4) * sum |h|^4
    const double s4 = sum_abs4(H1);
    out.sigma2_null = (out.s_hat * n_t / n_r) * s4 -
                      (out.s_hat * out.s_hat * n_t / (n_r * model.nu4)) * s4;
    if (!(out.sigma2_null > 0.0))
        throw NumericalError("equality_test: degenerate variance estimate");

    out.t = out.stat / std::sqrt(2.0 * out.sigma2_null);
    out.threshold = normal_quantile(1.0 - alpha);
    out.reject = out.t > out.threshold;
    return out;
}

double predicted_power(const Eigen::VectorXd& l1, const Eigen::VectorXd& l2, int n_r, double s,
                       double alpha, const EntryModel& model) {
    if (l1.size() != l2.size()) throw ValidationError("predicted_power: fading sizes differ");
    check_fading(l1, "predicted_power");
    check_fading(l2, "predicted_power");
    if (n_r < 1) throw ValidationError("predicted_power: need at least one receive antenna");
    check_s(s, "predicted_power");
    check_alpha(alpha);
    check_moments(model, "predicted_power");

    const double n_t = static_cast<double>(l1.size());
    const double q = std::sqrt(s * n_t);
    const double sum2_1 = l1.array().square().sum(), sum2_2 = l2.array().square().sum();
    const double sum4_1 = l1.array().pow(4).sum(), sum4_2 = l2.array().pow(4).sum();

    const double shift = q * std::sqrt(static_cast<double>(n_r)) / n_t * (sum2_1 - sum2_2);
    const double var0 = (model.nu4 - s) / n_t * sum4_1;
    const double var1 = (model.nu4 - s) / n_t * (sum4_1 + sum4_2);
    if (!(var0 > 0.0) || !(var1 > 0.0))
        throw NumericalError("predicted_power: degenerate variance");
    const double threshold = std::sqrt(2.0) * normal_quantile(1.0 - alpha) * std::sqrt(var0);
    return 1.0 - normal_cdf((threshold - shift) / std::sqrt(var1));
}

// ---------------------------------------------------------------- mutual information

double mutual_information(const Eigen::MatrixXcd& H, double sigma2) {
    if (!(sigma2 > 0.0)) throw ValidationError("mutual_information: sigma2 must be positive");
    if (!H.allFinite()) throw ValidationError("mutual_information: channel has non-finite entries");
    const Eigen::Index n_r = H.rows();
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(n_r, n_r);
    M.noalias() += H * H.adjoint() / sigma2;
    return logdet_hermitian_pd(M);
}

MiCltParams mi_clt_params(const Eigen::VectorXd& l, int n_r, double sigma2,
                          const SparsityConfig& sparsity, const EntryModel& model) {
    check_fading(l, "mi_clt_params");
    if (n_r < 1) throw ValidationError("mi_clt_params: need at least one receive antenna");
    Eigen::VectorXd d = Eigen::VectorXd::Ones(n_r);
    Eigen::VectorXd dt = l.array().square();
    return mi_clt_params_weighted(d, dt, sigma2, sparsity, model);
}

MiCltParams mi_clt_params_weighted(const Eigen::VectorXd& d, const Eigen::VectorXd& dt,
                                   double sigma2, const SparsityConfig& sparsity,
                                   const EntryModel& model) {
    if (d.size() == 0 || dt.size() == 0)
        throw ValidationError("mi_clt_params: empty weight vector");
    if ((d.array() <= 0.0).any() || (dt.array() <= 0.0).any())
        throw ValidationError("mi_clt_params: weights must be positive");
    if (!(sigma2 > 0.0)) throw ValidationError("mi_clt_params: sigma2 must be positive");
    check_s(sparsity.s, "mi_clt_params");
    check_moments(model, "mi_clt_params");

    const double n_t = static_cast<double>(dt.size());
    const double n_rd = static_cast<double>(d.size());
    const cplx z(-sigma2, 0.0);
    ScalarMiEquivalent sc = solve_scalar_mi_system(d, dt, z);

    MiCltParams out;
    out.delta = sc.delta.real();
    out.delta_tilde = sc.delta_tilde.real();

    // deterministic equivalent of the mutual information
    double v = 0.0;
    for (Eigen::Index j = 0; j < dt.size(); ++j) v += std::log1p(out.delta * dt[j]);
    for (Eigen::Index i = 0; i < d.size(); ++i) v += std::log1p(out.delta_tilde * d[i]);
    v -= n_t * sigma2 * out.delta * out.delta_tilde;
    out.V = v;

    // weighted squared-resolvent traces on each side
    double trD2T2 = 0.0;
    for (Eigen::Index j = 0; j < dt.size(); ++j) {
        double ttj = sc.t_tilde_diag[j].real();
        trD2T2 += dt[j] * dt[j] * ttj * ttj;
    }
    double trT2 = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        double ti = sc.t_diag[i].real();
        trT2 += d[i] * d[i] * ti * ti;
    }

    const double s = sparsity.s, q = sparsity.q;
    const double coef = model.nu4 - (model.kappa + 2.0) * s;
    const double s4 = sigma2 * sigma2;
    out.mu = -coef * s4 * trD2T2 * trT2 / (2.0 * q * std::sqrt(n_rd) * n_t);

    const double gamma = s4 / (n_t * n_t) * trD2T2 * trT2;
    if (!(gamma > 0.0) || !(gamma < 1.0))
        throw NumericalError("mi_clt_params: variance expansion unstable (log argument " +
                             std::to_string(1.0 - gamma) + ")");
    double var = coef * s4 / (n_rd * n_t) * trD2T2 * trT2 -
                 (q * q / n_rd) * std::log1p(-gamma);
    if (!(var > 0.0)) throw NumericalError("mi_clt_params: nonpositive variance");
    out.sigma = std::sqrt(var);
    return out;
}

double mi_t_statistic(const MiCltParams& params, double mi, int n_r, double q) {
    if (!(params.sigma > 0.0)) throw ValidationError("mi_t_statistic: sigma not set");
    return (q / std::sqrt(static_cast<double>(n_r)) * (mi - params.V) - params.mu) /
           params.sigma;
}

double outage_probability(const MiCltParams& params, double rate, int n_r, double q) {
    if (!(params.sigma > 0.0)) throw ValidationError("outage_probability: sigma not set");
    return normal_cdf(
        (q / std::sqrt(static_cast<double>(n_r)) * (rate - params.V) - params.mu) /
        params.sigma);
}

}  // namespace specgram
