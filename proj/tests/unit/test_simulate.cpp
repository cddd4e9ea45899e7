#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "specgram/contour.hpp"
#include "specgram/errors.hpp"
#include "specgram/fluct.hpp"
#include "specgram/profile.hpp"
#include "specgram/rng.hpp"
#include "specgram/simulate.hpp"
#include "specgram/stats.hpp"

using namespace specgram;
using cplx = std::complex<double>;

TEST_CASE("gram samples are seed-pinned and satisfy their invariants") {
    VarianceProfile pr = VarianceProfile::constant(12, 16, 1.3);
    SparsityConfig sp = SparsityConfig::from_s(0.5, pr.n, Regime::Moderate);
    EntryModel model = EntryModel::real_gaussian();

    GramSample a = sample_gram(pr, sp, model, 99);
    GramSample b = sample_gram(pr, sp, model, 99);
    GramSample c = sample_gram(pr, sp, model, 100);
    CHECK(a.S == b.S);
    CHECK(a.eigenvalues == b.eigenvalues);
    CHECK(a.S != c.S);

    CHECK(a.real_entries);
    CHECK(a.S.imag().cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.S - a.S.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 0; i + 1 < a.eigenvalues.size(); ++i)
        CHECK(a.eigenvalues[i] <= a.eigenvalues[i + 1]);
    CHECK(a.eigenvalues.minCoeff() >= -1e-10);
    CHECK(a.mask_density > 0.2);
    CHECK(a.mask_density < 0.8);

    GramSample z = sample_gram(pr, sp, EntryModel::complex_gaussian(), 7);
    CHECK_FALSE(z.real_entries);
    CHECK(z.S.imag().cwiseAbs().maxCoeff() > 0.0);
    CHECK(std::abs(z.S.trace().real() - z.eigenvalues.sum()) < 1e-8);
}

TEST_CASE("mean of the normalized trace matches the profile average") {
    VarianceProfile pr = VarianceProfile::constant(12, 16, 1.0);
    SparsityConfig sp = SparsityConfig::from_s(0.5, pr.n, Regime::Moderate);
    EntryModel model = EntryModel::real_gaussian();

    const int reps = 200;
    std::vector<double> tr(reps);
    for (int r = 0; r < reps; ++r)
        tr[r] = sample_gram(pr, sp, model, 2000 + r).S.trace().real() / pr.p;
    MeanVar mv = mean_var(tr);
    double want = pr.sigma2.sum() / (static_cast<double>(pr.p) * pr.n);
    CHECK(std::abs(mv.mean - want) < 4.0 * mv.se_mean);
}

TEST_CASE("eigenvalue helper: exact cases, moment identities, input checks") {
    Eigen::MatrixXd I3 = Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd ev = eigenvalues(I3);
    for (int i = 0; i < 3; ++i) CHECK(ev[i] == doctest::Approx(1.0).epsilon(1e-12));

    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXcd u(4);
    for (int i = 0; i < 4; ++i) u[i] = cplx(g(rng), g(rng));
    Eigen::MatrixXcd rank1 = u * u.adjoint();
    Eigen::VectorXd evr = eigenvalues(rank1);
    CHECK(evr[3] == doctest::Approx(u.squaredNorm()).epsilon(1e-10));
    for (int i = 0; i < 3; ++i) CHECK(std::abs(evr[i]) < 1e-10);

    Eigen::MatrixXcd X(6, 9);
    for (int j = 0; j < 9; ++j)
        for (int i = 0; i < 6; ++i) X(i, j) = cplx(g(rng), g(rng));
    Eigen::MatrixXcd S = X * X.adjoint();
    Eigen::VectorXd evs = eigenvalues(S);
    CHECK(evs.sum() == doctest::Approx(S.trace().real()).epsilon(1e-10));
    CHECK(evs.squaredNorm() == doctest::Approx(S.squaredNorm()).epsilon(1e-10));

    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 0.0, 1.0;
    CHECK_THROWS_AS(eigenvalues(bad), ValidationError);
}

TEST_CASE("masked vector: zero fraction and per-entry second moment") {
    Eigen::VectorXd sigma2(3);
    sigma2 << 0.5, 1.0, 2.0;
    const double s = 0.4;
    EntryModel model = EntryModel::complex_gaussian();
    std::mt19937_64 rng = make_stream(11, 0);

    const int reps = 40000;
    Eigen::Vector3d m2 = Eigen::Vector3d::Zero();
    int zeros = 0;
    for (int r = 0; r < reps; ++r) {
        Eigen::VectorXcd x = sample_masked_vector(sigma2, s, model, rng);
        for (int k = 0; k < 3; ++k) {
            m2[k] += std::norm(x[k]);
            if (x[k] == cplx(0.0, 0.0)) ++zeros;
        }
    }
    m2 /= reps;
    for (int k = 0; k < 3; ++k) CHECK(m2[k] == doctest::Approx(sigma2[k]).epsilon(0.05));
    CHECK(static_cast<double>(zeros) / (3.0 * reps) == doctest::Approx(1.0 - s).epsilon(0.02));

    CHECK_THROWS_AS(sample_masked_vector(sigma2, 0.0, model, rng), ValidationError);
    Eigen::VectorXd neg(1);
    neg << -1.0;
    CHECK_THROWS_AS(sample_masked_vector(neg, 0.5, model, rng), ValidationError);
}

TEST_CASE("quadratic-form covariance: closed forms, loop reference, monte carlo") {
    const int p = 4;
    Eigen::VectorXd ones2 = Eigen::VectorXd::Ones(p);
    Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(p, p);

    // identity quadratic form at s=1: chi-square-type variance
    cplx v_real = quadratic_form_oracle(I, I, ones2, EntryModel::real_gaussian(), 1.0);
    CHECK(v_real.real() == doctest::Approx(2.0 * p).epsilon(1e-12));
    cplx v_cplx = quadratic_form_oracle(I, I, ones2, EntryModel::complex_gaussian(), 1.0);
    CHECK(v_cplx.real() == doctest::Approx(1.0 * p).epsilon(1e-12));

    // random matrices against the written-out double sum
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXcd A(p, p), B(p, p);
    Eigen::VectorXd sigma2(p);
    for (int j = 0; j < p; ++j) {
        sigma2[j] = 0.5 + 0.25 * j;
        for (int i = 0; i < p; ++i) {
            A(i, j) = cplx(g(rng), g(rng));
            B(i, j) = cplx(g(rng), g(rng));
        }
    }
    const double s = 0.5;
    EntryModel model = EntryModel::real_gaussian();
    cplx got = quadratic_form_oracle(A, B, sigma2, model, s);
    cplx tr1(0, 0);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) tr1 += A(i, j) * sigma2[j] * B(j, i) * sigma2[i];
    cplx diag(0, 0);
    for (int k = 0; k < p; ++k) diag += A(k, k) * B(k, k) * sigma2[k] * sigma2[k];
    cplx want = (model.kappa + 1.0) * tr1 + (model.nu4 / s - model.kappa - 2.0) * diag;
    CHECK(std::abs(got - want) < 1e-12);

    // monte carlo confirmation; proper complex entries make the limit exact
    // for arbitrary (even non-normal) A and B
    EntryModel cg = EntryModel::complex_gaussian();
    cplx got_c = quadratic_form_oracle(A, B, sigma2, cg, s);
    std::mt19937_64 mc = make_stream(3, 0);
    const int reps = 200000;
    cplx trA(0, 0), trB(0, 0);
    for (int k = 0; k < p; ++k) {
        trA += A(k, k) * sigma2[k];
        trB += B(k, k) * sigma2[k];
    }
    std::vector<double> prod_re(reps), prod_im(reps);
    for (int r = 0; r < reps; ++r) {
        Eigen::VectorXcd x = sample_masked_vector(sigma2, s, cg, mc);
        cplx qa = x.dot(A * x) - trA;
        cplx qb = x.dot(B * x) - trB;
        prod_re[r] = (qa * qb).real();
        prod_im[r] = (qa * qb).imag();
    }
    MeanVar mv_re = mean_var(prod_re);
    MeanVar mv_im = mean_var(prod_im);
    CHECK(std::abs(mv_re.mean - got_c.real()) < 4.0 * mv_re.se_mean);
    CHECK(std::abs(mv_im.mean - got_c.imag()) < 4.0 * mv_im.se_mean);

    // real entries require the symmetric-matrix form of the same limit
    Eigen::MatrixXcd As = 0.5 * (A + A.transpose());
    Eigen::MatrixXcd Bs = 0.5 * (B + B.transpose());
    cplx got_s = quadratic_form_oracle(As, Bs, sigma2, model, s);
    std::mt19937_64 mc2 = make_stream(4, 0);
    cplx trAs = (As.diagonal().array() * sigma2.array().cast<cplx>()).sum();
    cplx trBs = (Bs.diagonal().array() * sigma2.array().cast<cplx>()).sum();
    for (int r = 0; r < reps; ++r) {
        Eigen::VectorXcd x = sample_masked_vector(sigma2, s, model, mc2);
        cplx qa = x.dot(As * x) - trAs;  // real x: dot's conjugation is a no-op
        cplx qb = x.dot(Bs * x) - trBs;
        prod_re[r] = (qa * qb).real();
    }
    MeanVar mv_s = mean_var(prod_re);
    CHECK(std::abs(mv_s.mean - got_s.real()) < 4.0 * mv_s.se_mean);

    CHECK_THROWS_AS(quadratic_form_oracle(A, B, sigma2, model, 1.5), ValidationError);
    CHECK_THROWS_AS(quadratic_form_oracle(A.topRows(2), B, sigma2, model, s), ValidationError);
}

TEST_CASE("statistic centering pieces per regime") {
    VarianceProfile pr = VarianceProfile::constant(20, 40, 1.0);
    TestFunction f = tf_x2();
    Contour contour = default_contour(pr, f, 100);
    EntryModel model = EntryModel::complex_gaussian();

    SparsityConfig mod = SparsityConfig::from_s(0.5, pr.n, Regime::Moderate);
    LssCentering cm = lss_centering(pr, f, contour, mod, model);
    CHECK(cm.correction == 0.0);
    CHECK(cm.f_dpi ==
          doctest::Approx(lsd_integral(pr, f.value, contour)).epsilon(1e-12));

    SparsityConfig high = SparsityConfig::from_q(std::pow(pr.n, 0.4), pr.n, Regime::High);
    LssCentering ch = lss_centering(pr, f, contour, high, model);
    CHECK(ch.correction ==
          doctest::Approx(corrected_centering(pr, f, contour, high, model)).epsilon(1e-12));
    CHECK(ch.correction != 0.0);
}

TEST_CASE("monte carlo battery: determinism, manual replay, eigen/trace paths") {
    VarianceProfile pr = VarianceProfile::constant(16, 32, 1.0);
    SparsityConfig sp = SparsityConfig::from_s(0.5, pr.n, Regime::Moderate);
    EntryModel model = EntryModel::real_gaussian();
    TestFunction f = tf_x();
    Contour contour = default_contour(pr, f, 100);

    McBatteryResult r1 = mc_battery(pr, sp, model, f, contour, 8, 42);
    McBatteryResult r2 = mc_battery(pr, sp, model, f, contour, 8, 42);
    CHECK(r1.stats == r2.stats);
    CHECK(r1.statistic_name == "centered_lss[x]");
    CHECK(r1.replications == 8);
    CHECK(r1.var_theory > 0.0);

    // trace path (f named "x") versus the generic eigenvalue path
    TestFunction f_eig = f;
    f_eig.name = "x_generic";
    McBatteryResult r3 = mc_battery(pr, sp, model, f_eig, contour, 8, 42);
    for (int r = 0; r < 8; ++r)
        CHECK(r1.stats[r] == doctest::Approx(r3.stats[r]).epsilon(1e-9));

    // logdet path versus the generic eigenvalue path
    TestFunction fl = tf_log1p_scaled(1.0);
    Contour cl = default_contour(pr, fl, 100);
    TestFunction fl_eig = fl;
    fl_eig.name = "log_generic";
    McBatteryResult r4 = mc_battery(pr, sp, model, fl, cl, 8, 42);
    McBatteryResult r5 = mc_battery(pr, sp, model, fl_eig, cl, 8, 42);
    for (int r = 0; r < 8; ++r)
        CHECK(r4.stats[r] == doctest::Approx(r5.stats[r]).epsilon(1e-8));

    CHECK_THROWS_AS(mc_battery(pr, sp, model, f, contour, 1, 42), ValidationError);
}

TEST_CASE("battery summary fields agree with the raw statistics") {
    VarianceProfile pr = VarianceProfile::constant(10, 20, 1.0);
    SparsityConfig sp = SparsityConfig::from_s(0.5, pr.n, Regime::Moderate);
    EntryModel model = EntryModel::complex_gaussian();
    TestFunction f = tf_x();
    Contour contour = default_contour(pr, f, 100);

    McBatteryResult res = mc_battery(pr, sp, model, f, contour, 6, 314);
    MeanVar mv = mean_var(res.stats);
    CHECK(res.mean == doctest::Approx(mv.mean).epsilon(1e-12));
    CHECK(res.var == doctest::Approx(mv.var).epsilon(1e-12));
    CHECK(res.se_mean == doctest::Approx(mv.se_mean).epsilon(1e-12));
    CHECK(res.ks_empirical > 0.0);
    CHECK(res.ks_theory > 0.0);
    CHECK(res.seed == 314);
}

TEST_CASE("per-sample statistic: wrapper versus precomputed centering") {
    VarianceProfile pr = VarianceProfile::constant(10, 20, 1.0);
    SparsityConfig sp = SparsityConfig::from_s(0.5, pr.n, Regime::Moderate);
    EntryModel model = EntryModel::real_gaussian();
    TestFunction f = tf_x2();
    Contour contour = default_contour(pr, f, 100);

    GramSample smp = sample_gram(pr, sp, model, 8);
    LssCentering centering = lss_centering(pr, f, contour, sp, model);
    double a = centered_lss(pr, smp, f, contour, sp, model);
    double b = centered_lss_given(smp, f, sp, pr.p, centering);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));

    // hand evaluation of the same definition
    double sum_f = 0.0;
    for (int i = 0; i < smp.eigenvalues.size(); ++i)
        sum_f += f.value(cplx(smp.eigenvalues[i], 0.0)).real();
    double manual =
        std::sqrt(static_cast<double>(pr.p)) * sp.q * (sum_f / pr.p - centering.f_dpi);
    CHECK(a == doctest::Approx(manual).epsilon(1e-10));

    LssCentering wrong = centering;
    CHECK_THROWS_AS(
        centered_lss_given(smp, f, sp, pr.p + 1, wrong), ValidationError);
}
