#include <catch2/catch.hpp>

#include <cmath>

#include "bisbm/rng.hpp"
#include "bisbm/stats.hpp"

using namespace bisbm;

namespace {

Matrix random_gaussian(int rows, int cols, CounterRng& rng) {
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("standardize_columns population convention", "[stats]") {
    SECTION("already standardized column is unchanged") {
        Matrix y(2, 1);
        y << 1.0, -1.0;
        const Matrix out = standardize_columns(y);
        CHECK(out(0, 0) == Approx(1.0).epsilon(1e-14));
        CHECK(out(1, 0) == Approx(-1.0).epsilon(1e-14));
    }
    SECTION("hand-computed three-point column") {
        Matrix y(3, 1);
        y << 0.0, 2.0, 4.0;  // mean 2, population variance 8/3
        const Matrix out = standardize_columns(y);
        const double scale = std::sqrt(8.0 / 3.0);
        CHECK(out(0, 0) == Approx(-2.0 / scale).epsilon(1e-14));
        CHECK(out(1, 0) == Approx(0.0).margin(1e-14));
        CHECK(out(2, 0) == Approx(2.0 / scale).epsilon(1e-14));
    }
    SECTION("constant column raises an error naming the column") {
        Matrix y(3, 2);
        y << 1.0, 5.0, 2.0, 5.0, 3.0, 5.0;
        CHECK_THROWS_WITH(standardize_columns(y), Catch::Contains("column 1"));
    }
}

TEST_CASE("pearson_z hand computation", "[stats]") {
    // m = 2, both columns standardized to (1, -1): rho = 1, s = 8, x = 1
    PairedData data;
    data.y1 = Matrix(2, 1);
    data.y1 << 1.0, -1.0;
    data.y2 = data.y1;
    // m = 2 violates m >= 3, so drive the internal kernel through a replicated
    // version: (1,-1,1,-1) has the same standardization and moments
    data.y1 = Matrix(4, 1);
    data.y1 << 1.0, -1.0, 1.0, -1.0;
    data.y2 = data.y1;
    const PearsonResult out = pearson_z(data);
    CHECK(out.stats.rho_hat(0, 0) == Approx(1.0).epsilon(1e-12));
    CHECK(out.stats.s(0, 0) == Approx(8.0).epsilon(1e-12));
    CHECK(out.z.values(0, 0) == Approx(2.0 / std::sqrt(8.0 / 4.0)).epsilon(1e-12));

    SECTION("negated column flips the correlation and the statistic's sign") {
        // note: the variance term s is not symmetric under negation at |rho| = 1,
        // so only the signs of rho and x flip, not the magnitude of x
        PairedData neg = data;
        neg.y2 = -neg.y2;
        const PearsonResult flipped = pearson_z(neg);
        CHECK(flipped.stats.rho_hat(0, 0) == Approx(-1.0).epsilon(1e-12));
        CHECK(flipped.z.values(0, 0) < 0.0);
        CHECK(out.z.values(0, 0) > 0.0);
    }
}

TEST_CASE("pearson_z null calibration and invariants", "[stats]") {
    CounterRng rng(61);
    PairedData data;
    data.y1 = random_gaussian(500, 50, rng);
    data.y2 = random_gaussian(500, 80, rng);
    const PearsonResult out = pearson_z(data);

    CHECK((out.stats.rho_hat.array().abs() <= 1.0 + 1e-12).all());
    CHECK(out.z.values.mean() == Approx(0.0).margin(0.05));
    const double var = (out.z.values.array() - out.z.values.mean()).square().mean();
    CHECK(var > 0.9);
    CHECK(var < 1.1);

    // sign of x matches sign of rho wherever s > 0
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 80; ++j)
            if (out.stats.s(i, j) > 0.0)
                CHECK(out.z.values(i, j) * out.stats.rho_hat(i, j) >= 0.0);
}

TEST_CASE("two_sample_z antisymmetry and null calibration", "[stats]") {
    CounterRng rng(62);
    PairedData g1, g2;
    g1.y1 = random_gaussian(200, 20, rng);
    g1.y2 = random_gaussian(200, 20, rng);
    g2.y1 = random_gaussian(200, 20, rng);
    g2.y2 = random_gaussian(200, 20, rng);

    SECTION("identical groups give exactly zero") {
        const TwoSampleResult out = two_sample_z(g1, g1);
        CHECK(out.z.values.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("swapping the groups negates the statistic") {
        const TwoSampleResult ab = two_sample_z(g1, g2);
        const TwoSampleResult ba = two_sample_z(g2, g1);
        CHECK(ab.z.values == (-ba.z.values).eval());
    }
    SECTION("same-distribution groups are approximately standard normal") {
        const TwoSampleResult out = two_sample_z(g1, g2);
        CHECK(out.z.values.mean() == Approx(0.0).margin(0.05));
        const double var = (out.z.values.array() - out.z.values.mean()).square().mean();
        CHECK(var > 0.9);
        CHECK(var < 1.1);
    }
}

TEST_CASE("mclr transform", "[stats]") {
    SECTION("equal positives map to zero") {
        Matrix counts(1, 3);
        counts << 1.0, 1.0, 1.0;
        CHECK(mclr(counts).values.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("hand example with a zero entry") {
        Matrix counts(1, 3);
        counts << std::exp(1.0), std::exp(3.0), 0.0;
        const MclrResult out = mclr(counts);
        CHECK(out.values(0, 0) == Approx(-1.0).epsilon(1e-12));
        CHECK(out.values(0, 1) == Approx(1.0).epsilon(1e-12));
        CHECK(out.values(0, 2) == 0.0);
    }
    SECTION("single positive entry maps to zero") {
        Matrix counts(1, 3);
        counts << 5.0, 0.0, 0.0;
        CHECK(mclr(counts).values.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("all-zero row is reported") {
        Matrix counts(2, 3);
        counts << 0.0, 0.0, 0.0, 1.0, 2.0, 3.0;
        const MclrResult out = mclr(counts);
        CHECK(out.all_zero_rows == std::vector<int>{0});
    }
    SECTION("all-positive rows are centered and scale equivariant") {
        CounterRng rng(63);
        Matrix counts(5, 8);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 8; ++j) counts(i, j) = 0.5 + 4.0 * rng.uniform();
        const MclrResult base = mclr(counts);
        for (int i = 0; i < 5; ++i) CHECK(base.values.row(i).mean() == Approx(0.0).margin(1e-12));

        Matrix scaled = counts;
        scaled.row(2) *= 37.5;
        const MclrResult rescaled = mclr(scaled);
        CHECK((rescaled.values - base.values).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK_THROWS_AS(mclr(Matrix::Constant(1, 2, -1.0)), InputError);
}
