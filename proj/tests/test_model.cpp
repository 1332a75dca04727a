#include <catch2/catch.hpp>

#include <cmath>

#include "bisbm/model.hpp"
#include "bisbm/rng.hpp"
#include "oracles.hpp"

using namespace bisbm;

namespace {

ModelParams single_block_params(double pi, double mu, double s2, double s02) {
    ModelParams p;
    p.alpha1 = Vector::Ones(1);
    p.alpha2 = Vector::Ones(1);
    p.pi = Matrix::Constant(1, 1, pi);
    p.alt_params.mu = Matrix::Constant(1, 1, mu);
    p.alt_params.sigma_sq = Matrix::Constant(1, 1, s2);
    p.null_params.sigma0_sq = s02;
    return p;
}

}  // namespace

TEST_CASE("log_null_density matches the Gaussian log-pdf", "[model]") {
    NullParams unit;
    CHECK(log_null_density(0.0, unit) == Approx(-0.9189385332046727).epsilon(1e-12));
    CHECK(log_null_density(1.0, unit) == Approx(-1.4189385332046727).epsilon(1e-12));

    NullParams wide;
    wide.sigma0_sq = 4.0;
    CHECK(log_null_density(2.0, wide) == Approx(-2.1120857137646180).epsilon(1e-12));
}

TEST_CASE("log_alt_density agrees with the null family when parameters coincide", "[model]") {
    AltParams alt;
    alt.mu = Matrix::Constant(2, 2, 0.0);
    alt.sigma_sq = Matrix::Constant(2, 2, 1.0);
    alt.mu(1, 1) = 1.0;
    alt.sigma_sq(1, 1) = 0.25;

    CHECK(log_alt_density(1.0, 1, 1, alt) == Approx(-0.9189385332046727 - std::log(0.5)).margin(1e-12));
    NullParams unit;
    for (double x : {-3.0, -0.5, 0.0, 1.7})
        CHECK(log_alt_density(x, 0, 0, alt) == Approx(log_null_density(x, unit)).epsilon(1e-14));
    CHECK(log_alt_density(0.0, 1, 1, alt) == Approx(-2.2257913526447274).epsilon(1e-12));

    CHECK_THROWS_AS(log_alt_density(0.0, 2, 0, alt), IndexError);
    CHECK_THROWS_AS(log_alt_density(0.0, 0, -1, alt), IndexError);
}

TEST_CASE("edge_responsibility spot values", "[model]") {
    SECTION("pi = 0 forces rho = 0") {
        ModelParams p = single_block_params(0.0, 1.0, 1.0, 1.0);
        CHECK(edge_responsibility(2.0, 0, 0, p) == 0.0);
        CHECK(l_value(2.0, 0, 0, p) == 1.0);
    }
    SECTION("identical densities give rho = pi") {
        ModelParams p = single_block_params(0.3, 0.0, 1.0, 1.0);
        for (double x : {-5.0, 0.0, 1.3})
            CHECK(edge_responsibility(x, 0, 0, p) == Approx(0.3).epsilon(1e-12));
    }
    SECTION("derived value against an independent high-precision evaluation") {
        ModelParams p = single_block_params(0.8, 1.0, 0.25, 1.0);
        CHECK(edge_responsibility(0.0, 0, 0, p) == Approx(0.5198499471683583).epsilon(1e-10));
        CHECK(l_value(0.0, 0, 0, p) == Approx(0.4801500528316417).epsilon(1e-10));
    }
}

TEST_CASE("edge_responsibility is monotone in pi and in x", "[model]") {
    double prev = -1.0;
    for (double pi : {0.0, 0.05, 0.2, 0.5, 0.9, 1.0}) {
        ModelParams p = single_block_params(pi, 2.0, 0.5, 1.0);
        const double rho = edge_responsibility(1.2, 0, 0, p);
        CHECK(rho >= prev);
        prev = rho;
    }

    // positive alternative mean with matched variance: increasing in x
    ModelParams p = single_block_params(0.4, 1.5, 1.0, 1.0);
    prev = -1.0;
    for (double x = -40.0; x <= 40.0; x += 0.5) {
        const double rho = edge_responsibility(x, 0, 0, p);
        CHECK(rho >= prev);
        CHECK(rho >= 0.0);
        CHECK(rho <= 1.0);
        prev = rho;
    }
}

TEST_CASE("complement identity holds exactly", "[model]") {
    ModelParams p = single_block_params(0.37, 1.1, 0.6, 1.3);
    CounterRng rng(11);
    for (int k = 0; k < 200; ++k) {
        const double x = rng.normal(0.0, 4.0);
        const double rho = edge_responsibility(x, 0, 0, p);
        CHECK(rho + (1.0 - rho) == 1.0);
    }
}

TEST_CASE("null density integrates to one", "[model]") {
    for (double s02 : {0.25, 1.0, 7.5}) {
        NullParams p;
        p.sigma0_sq = s02;
        const double sd = std::sqrt(s02);
        const double mass = oracles::simpson(
            [&](double x) { return std::exp(log_null_density(x, p)); }, -10.0 * sd, 10.0 * sd, 4000);
        CHECK(mass == Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("parameter invariants are enforced", "[model]") {
    ModelParams p = single_block_params(0.5, 1.0, 1.0, 1.0);
    CHECK_NOTHROW(p.validate());

    ModelParams bad_alpha = p;
    bad_alpha.alpha1 = Vector::Constant(1, 0.9);
    CHECK_THROWS_AS(bad_alpha.validate(), InputError);

    ModelParams bad_pi = p;
    bad_pi.pi(0, 0) = 1.5;
    CHECK_THROWS_AS(bad_pi.validate(), InputError);

    ModelParams bad_var = p;
    bad_var.alt_params.sigma_sq(0, 0) = 0.0;
    CHECK_THROWS_AS(bad_var.validate(), InputError);

    ZScoreMatrix x(Matrix::Zero(2, 2));
    CHECK_NOTHROW(x.validate());
    x.values(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(x.validate(), InputError);

    Dimensions d{3, 4, 5, 1};
    CHECK_THROWS_AS(d.validate(), DimensionError);
}
