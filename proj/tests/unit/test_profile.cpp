#include <doctest.h>

#include <cmath>
#include <random>

#include "specgram/errors.hpp"
#include "specgram/profile.hpp"
#include "specgram/rng.hpp"

using namespace specgram;

TEST_CASE("constant profile fields") {
    VarianceProfile pr = VarianceProfile::constant(4, 8, 1.5);
    CHECK(pr.p == 4);
    CHECK(pr.n == 8);
    CHECK(pr.c == doctest::Approx(0.5));
    CHECK(pr.sigma2.rows() == 4);
    CHECK(pr.sigma2.cols() == 8);
    CHECK(pr.sigma2.minCoeff() == doctest::Approx(1.5));
    CHECK(pr.sigma2_max() == doctest::Approx(1.5));
    CHECK(pr.sigma2_min_colmean() == doctest::Approx(1.5));
    CHECK(validate_profile(pr).ok);
}

TEST_CASE("dense profile rejects bad input") {
    Eigen::MatrixXd neg = Eigen::MatrixXd::Constant(2, 3, 1.0);
    neg(1, 2) = -0.25;
    CHECK_THROWS_AS(VarianceProfile::dense(neg), ValidationError);
    CHECK_THROWS_AS(VarianceProfile::dense(Eigen::MatrixXd()), ValidationError);
    CHECK_THROWS_AS(VarianceProfile::constant(0, 4, 1.0), ValidationError);
    CHECK_THROWS_AS(VarianceProfile::constant(4, 4, -1.0), ValidationError);
}

TEST_CASE("separable profile stores factors and matches the dense product") {
    Eigen::VectorXd d(3), dt(5);
    d << 0.5, 1.0, 2.0;
    dt << 0.8, 1.2, 0.6, 1.0, 1.4;
    VarianceProfile pr = make_separable_profile(d, dt);
    CHECK(pr.separable);
    CHECK(pr.p == 3);
    CHECK(pr.n == 5);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j)
            CHECK(pr.sigma2(i, j) == doctest::Approx(d[i] * dt[j]));
    CHECK(pr.sigma2_max() == doctest::Approx(2.0 * 1.4));
}

TEST_CASE("sparsity configuration") {
    SparsityConfig sp = SparsityConfig::from_q(4.0, 64, Regime::Moderate);
    CHECK(sp.s == doctest::Approx(0.25));
    CHECK(sp.phi == doctest::Approx(1.0 / 3.0));
    CHECK(sp.regime == Regime::Moderate);

    SparsityConfig sp2 = SparsityConfig::from_s(0.25, 64, Regime::High);
    CHECK(sp2.q == doctest::Approx(4.0));
    CHECK(sp2.regime == Regime::High);

    CHECK_THROWS_AS(SparsityConfig::from_q(0.0, 64, Regime::Moderate), ValidationError);
    CHECK_THROWS_AS(SparsityConfig::from_q(9.0, 64, Regime::Moderate), ValidationError);
    CHECK_THROWS_AS(SparsityConfig::from_s(0.0, 64, Regime::Moderate), ValidationError);
    CHECK_THROWS_AS(SparsityConfig::from_s(1.5, 64, Regime::Moderate), ValidationError);
}

TEST_CASE("entry model moments") {
    EntryModel re = EntryModel::real_gaussian();
    CHECK(re.kappa == 1);
    CHECK(re.nu4 == doctest::Approx(3.0));

    EntryModel co = EntryModel::complex_gaussian();
    CHECK(co.kappa == 0);
    CHECK(co.nu4 == doctest::Approx(2.0));

    EntryModel ga = EntryModel::shifted_gamma(2.0, 1.0);
    CHECK(ga.kappa == 1);
    CHECK(ga.nu4 == doctest::Approx(3.0 + 6.0 / 2.0));
    CHECK(standardized_fourth_moment(ga) == doctest::Approx(6.0));
}

TEST_CASE("entry draws are standardized") {
    std::mt19937_64 rng = make_stream(7, 0);
    const int reps = 40000;

    for (auto model : {EntryModel::real_gaussian(), EntryModel::shifted_gamma(2.0, 1.0)}) {
        double m1 = 0.0, m2 = 0.0;
        for (int r = 0; r < reps; ++r) {
            auto w = draw_entry(model, rng);
            CHECK(w.imag() == 0.0);
            m1 += w.real();
            m2 += w.real() * w.real();
        }
        CHECK(std::abs(m1 / reps) < 0.05);
        CHECK(m2 / reps == doctest::Approx(1.0).epsilon(0.05));
    }

    EntryModel co = EntryModel::complex_gaussian();
    std::complex<double> sum_w2(0, 0);
    double sum_abs2 = 0.0;
    for (int r = 0; r < reps; ++r) {
        auto w = draw_entry(co, rng);
        sum_w2 += w * w;
        sum_abs2 += std::norm(w);
    }
    CHECK(sum_abs2 / reps == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(sum_w2) / reps < 0.05);  // E w^2 = 0
}

TEST_CASE("shifted-gamma fourth moment agrees with its closed form by Monte Carlo") {
    EntryModel ga = EntryModel::shifted_gamma(2.0, 1.0);
    FourthMoment fm = standardized_fourth_moment_mc(ga, 400000, 3);
    CHECK(std::abs(fm.value - 6.0) < 4.0 * fm.se);
}

TEST_CASE("custom entry models") {
    // Rademacher: fourth moment exactly 1.
    EntryModel rad = EntryModel::custom(
        [](std::mt19937_64& rng) {
            return (rng() & 1u) ? 1.0 : -1.0;
        },
        1, "rademacher");
    FourthMoment fm = standardized_fourth_moment_mc(rad, 20000, 5);
    CHECK(fm.value == doctest::Approx(1.0).epsilon(1e-12));

    // Complex two-part draw: E w^2 = 0, E |w|^2 = 1.
    EntryModel cc = EntryModel::custom_complex([](std::mt19937_64& rng) {
        std::normal_distribution<double> g;
        return std::complex<double>(g(rng), g(rng)) / std::sqrt(2.0);
    });
    std::mt19937_64 rng = make_stream(11, 0);
    std::complex<double> sum_w2(0, 0);
    double sum_abs2 = 0.0;
    const int reps = 30000;
    for (int r = 0; r < reps; ++r) {
        auto w = draw_entry(cc, rng);
        sum_w2 += w * w;
        sum_abs2 += std::norm(w);
    }
    CHECK(sum_abs2 / reps == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(sum_w2) / reps < 0.05);

    CHECK_THROWS_AS(EntryModel::custom(nullptr, 1), ValidationError);
    CHECK_THROWS_AS(EntryModel::custom([](std::mt19937_64&) { return 0.0; }, 2),
                    ValidationError);
}

TEST_CASE("seeded streams are reproducible and distinct") {
    std::mt19937_64 a = make_stream(42, 3);
    std::mt19937_64 b = make_stream(42, 3);
    std::mt19937_64 c = make_stream(42, 4);
    std::mt19937_64 d = make_stream(43, 3);
    bool differs_c = false, differs_d = false;
    for (int i = 0; i < 16; ++i) {
        auto va = a(), vb = b(), vc = c(), vd = d();
        CHECK(va == vb);
        differs_c = differs_c || (va != vc);
        differs_d = differs_d || (va != vd);
    }
    CHECK(differs_c);
    CHECK(differs_d);
}
