#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "specgram/contour.hpp"
#include "specgram/detequiv.hpp"
#include "specgram/errors.hpp"
#include "specgram/fluct.hpp"
#include "specgram/profile.hpp"

using namespace specgram;
using cplx = std::complex<double>;

namespace {

Eigen::MatrixXd random_profile_matrix(int p, int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    Eigen::MatrixXd m(p, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < p; ++i) m(i, j) = u(rng);
    return m;
}

// Mean-system source vector written as plain loops over the definitions, to
// cross-check the vectorized production path.
Eigen::VectorXcd theta_by_loops(const VarianceProfile& pr, const DetEquivalent& det,
                                const SparsityConfig& sp, const EntryModel& model,
                                const USystems& u) {
    const int p = pr.p, n = pr.n;
    const double nd = n, pd = p;
    const cplx z = det.z, z2 = z * z, z3 = z2 * z;

    Eigen::VectorXcd B(n), C1(n);
    for (int j = 0; j < n; ++j) {
        cplx inner(0, 0), tr_col(0, 0), inner_u(0, 0);
        for (int i = 0; i < p; ++i) {
            cplx tr_row(0, 0);
            for (int m = 0; m < n; ++m)
                tr_row += pr.sigma2(i, m) * pr.sigma2(i, m) * det.t_tilde[m] * det.t_tilde[m];
            inner += pr.sigma2(i, j) * det.t[i] * det.t[i] * det.t[i] * tr_row;
            tr_col += pr.sigma2(i, j) * pr.sigma2(i, j) * det.t[i] * det.t[i];
            inner_u += pr.sigma2(i, j) * det.t[i] * det.t[i] * det.t[i] * u.U_tilde[i];
        }
        cplx tt = det.t_tilde[j];
        B[j] = z3 / (nd * nd) * tt * tt * inner + z2 / nd * tt * tt * tt * tr_col;
        C1[j] = z3 / nd * tt * tt * inner_u + z2 * tt * tt * tt * u.U[j];
    }

    double coefB = nd * model.nu4 / (sp.q * std::sqrt(pd));
    double coefC1 = 0.0;
    if (sp.regime == Regime::Moderate) {
        coefB -= sp.q / std::sqrt(pd) * (model.kappa + 2.0);
        coefC1 = sp.q / std::sqrt(pd) * model.kappa;
    }
    return coefB * B + coefC1 * C1;
}

}  // namespace

TEST_CASE("coupling coefficients on the constant profile match the closed form") {
    VarianceProfile pr = VarianceProfile::constant(2, 3, 1.0);
    const cplx z1(-1.0, 0.8), z2(-1.4, 0.5);
    DetEquivalent d1 = solve_canonical_system(pr, z1);
    DetEquivalent d2 = solve_canonical_system(pr, z2);
    Eigen::MatrixXcd A = a_matrix(pr, d1, d2);

    const double ratio = 2.0 / 3.0;  // p/n
    cplx t1 = d1.t[0], t2 = d2.t[0];
    cplx den1 = 1.0 + ratio * t1, den2 = 1.0 + ratio * t2;
    cplx expect = ratio * t1 * t2 / (3.0 * den1 * den2);
    for (int l = 0; l < 3; ++l)
        for (int m = 0; m < 3; ++m) CHECK(std::abs(A(l, m) - expect) < 1e-12);

    // on the constant profile the denominators reduce to -1/(z tt)
    cplx via_tt = ratio / 3.0 * t1 * t2 * z1 * z2 * d1.t_tilde[0] * d2.t_tilde[0];
    CHECK(std::abs(expect - via_tt) < 1e-12);
}

TEST_CASE("per-index linear systems: production path equals the reference path") {
    VarianceProfile pr = VarianceProfile::dense(random_profile_matrix(4, 6, 31));
    for (cplx z : {cplx(-1.5, 0.6), cplx(0.9, 1.1)}) {
        DetEquivalent det = solve_canonical_system(pr, z);
        USystems fast = solve_u_systems(pr, det);
        USystems ref = solve_u_systems_reference(pr, det);
        for (int j = 0; j < pr.n; ++j) CHECK(std::abs(fast.U[j] - ref.U[j]) < 1e-10);
        for (int i = 0; i < pr.p; ++i)
            CHECK(std::abs(fast.U_tilde[i] - ref.U_tilde[i]) < 1e-10);
    }
}

TEST_CASE("mean sources match a loop transcription for every moment/regime combination") {
    VarianceProfile pr = VarianceProfile::dense(random_profile_matrix(3, 4, 17));
    const cplx z(-1.2, 0.7);
    DetEquivalent det = solve_canonical_system(pr, z);
    USystems u = solve_u_systems(pr, det);

    for (auto model : {EntryModel::real_gaussian(), EntryModel::complex_gaussian()}) {
        for (auto regime : {Regime::Moderate, Regime::High}) {
            SparsityConfig sp = SparsityConfig::from_s(0.3, pr.n, regime);
            Eigen::VectorXcd got = theta_sources(pr, det, sp, model, &u);
            Eigen::VectorXcd want = theta_by_loops(pr, det, sp, model, u);
            for (int j = 0; j < pr.n; ++j) CHECK(std::abs(got[j] - want[j]) < 1e-12);
        }
    }
}

TEST_CASE("mean kernel equals the assembled linear solve") {
    VarianceProfile pr = VarianceProfile::dense(random_profile_matrix(3, 5, 23));
    const cplx z(-1.0, 0.9);
    DetEquivalent det = solve_canonical_system(pr, z);
    SparsityConfig sp = SparsityConfig::from_s(0.4, pr.n, Regime::Moderate);
    EntryModel model = EntryModel::real_gaussian();

    Eigen::VectorXcd theta = theta_sources(pr, det, sp, model);
    Eigen::MatrixXcd A = a_matrix(pr, det, det);
    Eigen::VectorXcd psi =
        (Eigen::MatrixXcd::Identity(pr.n, pr.n) - A).fullPivLu().solve(theta);
    cplx want = psi.mean();
    cplx got = mean_kernel(pr, z, sp, model);
    CHECK(std::abs(got - want) < 1e-11);
}

TEST_CASE("separable fast paths agree with the dense machinery") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.6, 1.6);
    Eigen::VectorXd d(5), dt(7);
    for (int i = 0; i < d.size(); ++i) d[i] = u(rng);
    for (int j = 0; j < dt.size(); ++j) dt[j] = u(rng);
    VarianceProfile sep = make_separable_profile(d, dt);
    VarianceProfile dense = VarianceProfile::dense(d * dt.transpose());

    EntryModel model = EntryModel::real_gaussian();
    const cplx z1(-1.1, 0.8), z2(-0.7, 1.2);
    for (auto regime : {Regime::Moderate, Regime::High}) {
        SparsityConfig sp = SparsityConfig::from_s(0.35, sep.n, regime);
        cplx m_sep = mean_kernel(sep, z1, sp, model);
        cplx m_dense = mean_kernel(dense, z1, sp, model);
        CHECK(std::abs(m_sep - m_dense) < 1e-11);

        cplx g_sep = cov_kernel_G(sep, z1, z2, sp, model);
        cplx g_dense = cov_kernel_G(dense, z1, z2, sp, model);
        CHECK(std::abs(g_sep - g_dense) < 1e-10);
    }
}

TEST_CASE("covariance kernel is symmetric and reading-independent") {
    VarianceProfile pr = VarianceProfile::dense(random_profile_matrix(4, 6, 41));
    SparsityConfig sp = SparsityConfig::from_s(0.5, pr.n, Regime::Moderate);
    EntryModel model = EntryModel::complex_gaussian();
    const cplx z1(-1.3, 0.6), z2(0.4, 1.0);

    cplx g12 = cov_kernel_G(pr, z1, z2, sp, model);
    cplx g21 = cov_kernel_G(pr, z2, z1, sp, model);
    CHECK(std::abs(g12 - g21) < 1e-12);

    cplx alt = cov_kernel_G(pr, z1, z2, sp, model, true);
    CHECK(std::abs(g12 - alt) < 1e-10);
}

TEST_CASE("quadrature: unit mass and first moment of the spectral measure") {
    VarianceProfile pr = VarianceProfile::dense(random_profile_matrix(6, 10, 53));
    TestFunction fx = tf_x();
    Contour contour = default_contour(pr, fx, 400);

    double mass = lsd_integral(pr, [](cplx) { return cplx(1.0, 0.0); }, contour);
    CHECK(std::abs(mass - 1.0) < 5e-6);

    double mean = lsd_integral(pr, [](cplx z) { return z; }, contour);
    double want = pr.sigma2.sum() / (static_cast<double>(pr.p) * pr.n);
    CHECK(mean == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("clt mean wrappers: moderate integral, high short-circuit, recentring sign") {
    VarianceProfile pr = VarianceProfile::constant(30, 60, 1.0);
    TestFunction f = tf_x2();
    // the doubling change decays as 1/m^2; 800 nodes per edge is past the
    // 1e-6 warning threshold on this geometry
    Contour contour = default_contour(pr, f, 800);
    EntryModel model = EntryModel::complex_gaussian();

    SparsityConfig mod = SparsityConfig::from_s(0.4, pr.n, Regime::Moderate);
    SparsityConfig high = SparsityConfig::from_q(std::pow(pr.n, 0.4), pr.n, Regime::High);

    MeanQuadrature mq(pr, contour);
    QuadratureDiagnostics diag;
    double mean_mod = clt_mean(pr, f, contour, mod, model, &diag);
    CHECK(mean_mod == doctest::Approx(mq.integral(f, mod, model)).epsilon(1e-12));
    CHECK(diag.nodes_per_edge == 800);
    CHECK_FALSE(diag.accuracy_warning);

    CHECK(clt_mean(pr, f, contour, high, model) == 0.0);
    double corr = corrected_centering(pr, f, contour, high, model);
    CHECK(corr == doctest::Approx(-mq.integral(f, high, model)).epsilon(1e-12));
    CHECK_THROWS_AS(corrected_centering(pr, f, contour, mod, model), ValidationError);
}

TEST_CASE("trace-statistic variance anchor on a small dense profile") {
    VarianceProfile pr = VarianceProfile::dense(random_profile_matrix(6, 9, 67));
    TestFunction f = tf_x();
    Contour c1 = default_contour(pr, f, 100);
    Contour c2 = dilate(c1, 1.15);
    EntryModel model = EntryModel::real_gaussian();
    SparsityConfig sp = SparsityConfig::from_s(0.5, pr.n, Regime::Moderate);

    double got = clt_cov(pr, f, f, c1, c2, sp, model);
    double want = (model.nu4 - sp.s) / (static_cast<double>(pr.p) * pr.n) *
                  pr.sigma2.array().square().sum();
    CHECK(got == doctest::Approx(want).epsilon(1e-3));
}

TEST_CASE("covariance integral is symmetric in the test-function pair") {
    VarianceProfile pr = VarianceProfile::constant(8, 12, 1.0);
    TestFunction f = tf_x(), g = tf_x2();
    Contour c1 = default_contour(pr, f, 100);
    Contour c2 = dilate(c1, 1.15);
    EntryModel model = EntryModel::real_gaussian();
    SparsityConfig sp = SparsityConfig::from_s(0.6, pr.n, Regime::Moderate);

    QuadratureDiagnostics diag;
    double vfg = clt_cov(pr, f, g, c1, c2, sp, model, &diag);
    double vgf = clt_cov(pr, g, f, c1, c2, sp, model);
    CHECK(vfg == doctest::Approx(vgf).epsilon(1e-5));
    CHECK(diag.rel_change_on_doubling < 1e-4);
    CHECK(diag.accuracy_warning == (diag.rel_change_on_doubling > 1e-6));
}

TEST_CASE("test functions: parsing, probes, and derivative validation") {
    TestFunction fx = tf_from_name("x");
    CHECK(fx.value(cplx(2.0, 1.0)) == cplx(2.0, 1.0));
    CHECK(fx.derivative(cplx(2.0, 1.0)) == cplx(1.0, 0.0));

    TestFunction fl = tf_from_name("log1p_scaled:2.5");
    CHECK(fl.real_singularity == doctest::Approx(-2.5));
    CHECK(std::abs(fl.value(cplx(1.0, 0.0)) - std::log(1.0 + 1.0 / 2.5)) < 1e-14);

    CHECK_THROWS_AS(tf_from_name("sin"), ConfigError);
    CHECK_THROWS_AS(tf_log1p_scaled(0.0), ValidationError);

    VarianceProfile pr = VarianceProfile::constant(4, 8, 1.0);
    Contour contour = default_contour(pr, fx, 50);
    CHECK_NOTHROW(validate_test_function(fx, contour));

    TestFunction broken = fx;
    broken.derivative = [](cplx) { return cplx(2.0, 0.0); };
    CHECK_THROWS_AS(validate_test_function(broken, contour), ValidationError);
}

TEST_CASE("default contours clear support and singularities") {
    VarianceProfile pr = VarianceProfile::constant(50, 100, 1.0);
    TestFunction fx = tf_x();
    Contour c = default_contour(pr, fx);
    CHECK(c.x_right == doctest::Approx(1.2 * spectral_support_bound(pr)));
    CHECK(c.x_left < 0.0);

    TestFunction fl = tf_log1p_scaled(0.05);  // singularity just left of zero
    Contour cl = default_contour(pr, fl);
    CHECK(cl.x_left > fl.real_singularity);

    // a singularity at or right of zero leaves no room for the contour
    TestFunction bad = fl;
    bad.real_singularity = 0.25;
    CHECK_THROWS_AS(default_contour(pr, bad), ValidationError);

    Contour tiny;
    tiny.x_left = -0.5;
    tiny.x_right = 3.0;
    tiny.nodes_per_edge = 1;
    CHECK_THROWS_AS(upper_nodes(tiny), ValidationError);
}
