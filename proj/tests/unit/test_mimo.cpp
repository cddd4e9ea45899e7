#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "specgram/detequiv.hpp"
#include "specgram/errors.hpp"
#include "specgram/mimo.hpp"
#include "specgram/profile.hpp"
#include "specgram/rng.hpp"
#include "specgram/stats.hpp"

using namespace specgram;
using cplx = std::complex<double>;

TEST_CASE("channel sampler: degenerate fading, power normalization, rejections") {
    EntryModel model = EntryModel::complex_gaussian();
    std::mt19937_64 rng = make_stream(1, 0);

    // all-zero fading is a legal degenerate channel
    Eigen::MatrixXcd H0 = sample_channel(3, Eigen::VectorXd::Zero(4), 0.5, model, rng);
    CHECK(H0.cwiseAbs().maxCoeff() == 0.0);

    // per-entry variance l_j^2 / N_t regardless of s
    const int n_r = 6, n_t = 8;
    Eigen::VectorXd l(n_t);
    for (int j = 0; j < n_t; ++j) l[j] = 0.5 + 0.25 * j;
    const double want_power = n_r * l.array().square().sum() / n_t;
    for (double s : {1.0, 0.4}) {
        const int reps = 400;
        std::vector<double> pw(reps);
        std::mt19937_64 r2 = make_stream(2, 0);
        for (int r = 0; r < reps; ++r)
            pw[r] = sample_channel(n_r, l, s, model, r2).squaredNorm();
        MeanVar mv = mean_var(pw);
        CHECK(std::abs(mv.mean - want_power) < 4.0 * mv.se_mean);
    }

    Eigen::VectorXd neg(2);
    neg << 1.0, -0.5;
    CHECK_THROWS_AS(sample_channel(3, neg, 0.5, model, rng), ValidationError);
    CHECK_THROWS_AS(sample_channel(3, l, 0.0, model, rng), ValidationError);
    CHECK_THROWS_AS(sample_channel(0, l, 0.5, model, rng), ValidationError);
    CHECK_THROWS_AS(sample_channel(3, Eigen::VectorXd(), 0.5, model, rng), ValidationError);
}

TEST_CASE("equality test: identical channels, hand-checked estimate, input modes") {
    EntryModel model = EntryModel::real_gaussian();

    Eigen::MatrixXcd H1(2, 2), H2(2, 2);
    H1 << cplx(1, 0), cplx(0, 0), cplx(0, 0), cplx(0, 2);
    H2 << cplx(1, 0), cplx(0, 0), cplx(0, 0), cplx(0, 0);

    EqualityTest et = equality_test(H1, H2, 0.05, model);
    CHECK(et.s_hat == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(et.q_hat == doctest::Approx(1.0).epsilon(1e-15));
    // stat = q_hat/sqrt(2) * (5 - 1)
    CHECK(et.stat == doctest::Approx(4.0 / std::sqrt(2.0)).epsilon(1e-13));
    // sigma2_null = (0.5*2/2)*17 - (0.25*2/(2*3))*17
    const double s4 = 17.0;
    const double want_var = 0.5 * s4 - 17.0 / 12.0;
    CHECK(et.sigma2_null == doctest::Approx(want_var).epsilon(1e-13));
    CHECK(et.t == doctest::Approx(et.stat / std::sqrt(2.0 * want_var)).epsilon(1e-13));
    CHECK(et.threshold == doctest::Approx(normal_quantile(0.95)).epsilon(1e-13));
    CHECK(et.threshold == doctest::Approx(1.6448536269514722).epsilon(1e-12));
    CHECK_FALSE(et.reject);

    // identical channels: exactly zero statistic
    EqualityTest same = equality_test(H1, H1, 0.05, model);
    CHECK(same.stat == 0.0);
    CHECK_FALSE(same.reject);

    // externally supplied mask level overrides the zero count
    EqualityTest ks = equality_test(H1, H2, 0.05, model, 0.25);
    CHECK(ks.s_hat == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(ks.q_hat == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));

    CHECK_THROWS_AS(equality_test(H1, H2.topRows(1), 0.05, model), ValidationError);
    CHECK_THROWS_AS(equality_test(H1, H2, 1.5, model), ValidationError);
    Eigen::MatrixXcd Z = Eigen::MatrixXcd::Zero(2, 2);
    CHECK_THROWS_AS(equality_test(Z, H2, 0.05, model), NumericalError);
}

TEST_CASE("predicted power: exact size at the null and growth in the alternative") {
    EntryModel model = EntryModel::real_gaussian();
    Eigen::VectorXd l1 = Eigen::VectorXd::Constant(50, 3.0);
    const double alpha = 0.05;

    CHECK(predicted_power(l1, l1, 80, 0.25, alpha, model) ==
          doctest::Approx(alpha).epsilon(1e-12));

    double prev = alpha;
    for (double theta : {0.02, 0.05, 0.1, 0.2}) {
        Eigen::VectorXd l2 = l1.array() - theta;
        double pw = predicted_power(l1, l2, 80, 0.25, alpha, model);
        CHECK(pw > prev);
        prev = pw;
    }

    Eigen::VectorXd zero = Eigen::VectorXd::Zero(50);
    CHECK_THROWS_AS(predicted_power(l1, zero, 80, 0.25, alpha, model), ValidationError);
}

TEST_CASE("mutual information: exact small cases and the eigenvalue identity") {
    Eigen::MatrixXcd Z = Eigen::MatrixXcd::Zero(3, 5);
    CHECK(mutual_information(Z, 1.0) == 0.0);

    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXcd u(3), v(5);
    for (int i = 0; i < 3; ++i) u[i] = cplx(g(rng), g(rng));
    for (int j = 0; j < 5; ++j) v[j] = cplx(g(rng), g(rng));
    Eigen::MatrixXcd rank1 = u * v.adjoint();
    const double sigma2 = 0.7;
    double want = std::log1p(u.squaredNorm() * v.squaredNorm() / sigma2);
    CHECK(mutual_information(rank1, sigma2) == doctest::Approx(want).epsilon(1e-10));

    Eigen::MatrixXcd H(4, 6);
    for (int j = 0; j < 6; ++j)
        for (int i = 0; i < 4; ++i) H(i, j) = cplx(g(rng), g(rng)) / 2.0;
    Eigen::VectorXd lam =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(H * H.adjoint()).eigenvalues();
    double sum_log = 0.0;
    for (int i = 0; i < 4; ++i) sum_log += std::log1p(lam[i] / sigma2);
    CHECK(mutual_information(H, sigma2) == doctest::Approx(sum_log).epsilon(1e-8));

    CHECK_THROWS_AS(mutual_information(H, 0.0), ValidationError);
    Eigen::MatrixXcd bad = H;
    bad(1, 2) = cplx(std::numeric_limits<double>::infinity(), 0.0);
    CHECK_THROWS_AS(mutual_information(bad, 1.0), ValidationError);
}

TEST_CASE("information fluctuation parameters: identities and the amplitude overload") {
    const int n_r = 24, n_t = 32;
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    Eigen::VectorXd l(n_t);
    for (int j = 0; j < n_t; ++j) l[j] = u(rng);
    const double sigma2 = 0.5;
    SparsityConfig sp = SparsityConfig::from_s(0.25, n_t, Regime::Moderate);
    EntryModel model = EntryModel::complex_gaussian();

    MiCltParams a = mi_clt_params(l, n_r, sigma2, sp, model);
    MiCltParams b = mi_clt_params_weighted(Eigen::VectorXd::Ones(n_r), l.array().square(),
                                           sigma2, sp, model);
    CHECK(a.V == b.V);
    CHECK(a.mu == b.mu);
    CHECK(a.sigma == b.sigma);
    CHECK(a.delta == b.delta);
    CHECK(a.delta_tilde == b.delta_tilde);
    CHECK(a.sigma > 0.0);
    CHECK(std::isfinite(a.V));

    // log-denominator identity of the scalar fixed point at z = -sigma2:
    // 1 + dt_j delta == 1/(sigma2 * tt_j)
    Eigen::VectorXd d = Eigen::VectorXd::Ones(n_r);
    Eigen::VectorXd dt = l.array().square();
    ScalarMiEquivalent sc = solve_scalar_mi_system(d, dt, cplx(-sigma2, 0.0));
    double lhs = 0.0, rhs = 0.0;
    for (int j = 0; j < n_t; ++j) {
        lhs += std::log1p(sc.delta.real() * dt[j]);
        rhs -= std::log(sigma2 * sc.t_tilde_diag[j].real());
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

    // t statistic and outage arithmetic
    double mi = a.V + 0.3;
    double t = mi_t_statistic(a, mi, n_r, sp.q);
    double want_t = (sp.q / std::sqrt(static_cast<double>(n_r)) * 0.3 - a.mu) / a.sigma;
    CHECK(t == doctest::Approx(want_t).epsilon(1e-13));

    double rate_mid = a.V + std::sqrt(static_cast<double>(n_r)) / sp.q * a.mu;
    CHECK(outage_probability(a, rate_mid, n_r, sp.q) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(outage_probability(a, rate_mid - 50.0, n_r, sp.q) < 1e-10);
    CHECK(outage_probability(a, rate_mid + 50.0, n_r, sp.q) > 1.0 - 1e-10);

    MiCltParams unset;
    CHECK_THROWS_AS(mi_t_statistic(unset, 1.0, n_r, sp.q), ValidationError);
    CHECK_THROWS_AS(outage_probability(unset, 1.0, n_r, sp.q), ValidationError);
    CHECK_THROWS_AS(mi_clt_params_weighted(d, dt, -1.0, sp, model), ValidationError);
    Eigen::VectorXd dz = d;
    dz[0] = 0.0;
    CHECK_THROWS_AS(mi_clt_params_weighted(dz, dt, sigma2, sp, model), ValidationError);
}
