#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "specgram/detequiv.hpp"
#include "specgram/errors.hpp"
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

}  // namespace

TEST_CASE("constant-profile fixed point at z = -1, c = 1 is the golden ratio conjugate") {
    VarianceProfile pr = VarianceProfile::constant(40, 40, 1.0);
    DetEquivalent det = solve_canonical_system(pr, cplx(-1.0, 0.0));
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < pr.p; ++i) {
        CHECK(std::abs(det.t[i].real() - golden) < 1e-11);
        CHECK(std::abs(det.t[i].imag()) < 1e-13);
    }
    for (int j = 0; j < pr.n; ++j) CHECK(std::abs(det.t_tilde[j] - det.t[0]) < 1e-11);
    CHECK(det.residual < 1e-11);
    CHECK(det.iterations > 0);
}

TEST_CASE("solutions are Herglotz and conjugate-symmetric") {
    VarianceProfile pr = VarianceProfile::dense(random_profile_matrix(5, 8, 21));
    const cplx z(0.7, 0.9);
    DetEquivalent up = solve_canonical_system(pr, z);
    DetEquivalent down = solve_canonical_system(pr, std::conj(z));
    for (int i = 0; i < pr.p; ++i) {
        CHECK(up.t[i].imag() > 0.0);
        CHECK(std::abs(up.t[i] - std::conj(down.t[i])) < 1e-11);
    }
    for (int j = 0; j < pr.n; ++j)
        CHECK(std::abs(up.t_tilde[j] - std::conj(down.t_tilde[j])) < 1e-11);

    StieltjesPair m_up = stieltjes_m0(up);
    StieltjesPair m_down = stieltjes_m0(down);
    CHECK(std::abs(m_up.m0 - std::conj(m_down.m0)) < 1e-12);
    CHECK(std::abs(m_up.m0 - up.t.mean()) < 1e-14);
}

TEST_CASE("arguments on the nonnegative real axis are rejected") {
    VarianceProfile pr = VarianceProfile::constant(6, 9, 1.0);
    CHECK_THROWS_AS(solve_canonical_system(pr, cplx(0.5, 0.0)), DomainError);
    CHECK_THROWS_AS(solve_canonical_system(pr, cplx(0.0, 0.0)), DomainError);
    // strictly negative real arguments are fine
    CHECK_NOTHROW(solve_canonical_system(pr, cplx(-0.5, 0.0)));
}

TEST_CASE("iteration budget failures carry the last residual") {
    VarianceProfile pr = VarianceProfile::dense(random_profile_matrix(8, 12, 5));
    try {
        solve_canonical_system(pr, cplx(-1.0, 0.0), 1e-12, 2);
        FAIL("expected IterationError");
    } catch (const IterationError& e) {
        CHECK(e.last_residual > 0.0);
    }
}

TEST_CASE("separable canonical solve matches the two-scalar system") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    Eigen::VectorXd d(30), dt(45);
    for (int i = 0; i < d.size(); ++i) d[i] = u(rng);
    for (int j = 0; j < dt.size(); ++j) dt[j] = u(rng);
    VarianceProfile pr = make_separable_profile(d, dt);

    for (cplx z : {cplx(-2.0, 0.3), cplx(-1.0, 0.0), cplx(1.4, 0.8)}) {
        DetEquivalent det = solve_canonical_system(pr, z);
        ScalarMiEquivalent sc = solve_scalar_mi_system(d, dt, z);
        for (int i = 0; i < d.size(); ++i) CHECK(std::abs(det.t[i] - sc.t_diag[i]) < 1e-10);
        for (int j = 0; j < dt.size(); ++j)
            CHECK(std::abs(det.t_tilde[j] - sc.t_tilde_diag[j]) < 1e-10);
        // the diagonal closed forms hold at the reported fixed point
        for (int i = 0; i < d.size(); ++i) {
            cplx expect = -1.0 / (z * (1.0 + d[i] * sc.delta_tilde));
            CHECK(std::abs(sc.t_diag[i] - expect) < 1e-11);
        }
        cplx delta_check(0, 0);
        for (int i = 0; i < d.size(); ++i) delta_check += d[i] * sc.t_diag[i];
        delta_check /= static_cast<double>(dt.size());
        CHECK(std::abs(sc.delta - delta_check) < 1e-12);
    }
}

TEST_CASE("support bound for the constant profile") {
    VarianceProfile pr = VarianceProfile::constant(100, 200, 1.0);
    const double c = 0.5;
    CHECK(spectral_support_bound(pr) ==
          doctest::Approx((1.0 + std::sqrt(c)) * (1.0 + std::sqrt(c))));
    VarianceProfile pr2 = VarianceProfile::constant(100, 200, 2.5);
    CHECK(spectral_support_bound(pr2) ==
          doctest::Approx(2.5 * (1.0 + std::sqrt(c)) * (1.0 + std::sqrt(c))));
}

TEST_CASE("density on a grid: nonnegative, normalized, and matching the closed form") {
    // Aspect ratio 1/2, unit variances: density sqrt((b-x)(x-a))/(2 pi c x)
    // on [a, b] with a = (1-sqrt(c))^2, b = (1+sqrt(c))^2.
    VarianceProfile pr = VarianceProfile::constant(100, 200, 1.0);
    const double c = 0.5;
    const double a = (1.0 - std::sqrt(c)) * (1.0 - std::sqrt(c));
    const double b = (1.0 + std::sqrt(c)) * (1.0 + std::sqrt(c));

    const int m = 400;
    Eigen::VectorXd x(m + 1);
    const double lo = -0.2, hi = 3.4;
    for (int k = 0; k <= m; ++k) x[k] = lo + (hi - lo) * k / m;
    Eigen::VectorXd dens = lsd_density(pr, x, 1e-4);

    double mass = 0.0;
    for (int k = 0; k < m; ++k) {
        CHECK(dens[k] >= 0.0);
        mass += 0.5 * (dens[k] + dens[k + 1]) * (x[k + 1] - x[k]);
    }
    CHECK(std::abs(mass - 1.0) < 1e-2);

    for (double xx : {1.0, 1.5, 2.0}) {
        Eigen::VectorXd probe(1);
        probe[0] = xx;
        double got = lsd_density(pr, probe, 1e-6)[0];
        double want = std::sqrt((b - xx) * (xx - a)) / (2.0 * M_PI * c * xx);
        CHECK(got == doctest::Approx(want).epsilon(5e-4));
    }
}

TEST_CASE("scalar system rejects invalid inputs") {
    Eigen::VectorXd d = Eigen::VectorXd::Ones(4), dt = Eigen::VectorXd::Ones(6);
    CHECK_NOTHROW(solve_scalar_mi_system(d, dt, cplx(-1.0, 0.0)));
    Eigen::VectorXd bad = d;
    bad[2] = -1.0;
    CHECK_THROWS_AS(solve_scalar_mi_system(bad, dt, cplx(-1.0, 0.0)), ValidationError);
    CHECK_THROWS_AS(solve_scalar_mi_system(d, dt, cplx(2.0, 0.0)), DomainError);
}
