#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "ossmf/datagen.hpp"
#include "ossmf/geometry.hpp"
#include "ossmf/subspace.hpp"
#include "test_oracles.hpp"

using namespace ossmf;

namespace {

DatasetSpec small_spec() {
    DatasetSpec spec;
    spec.l = 60;
    spec.t = 200;
    spec.k = 4;
    spec.purity = 0.7;
    spec.snr_db = 15.0;
    spec.seed = 42;
    return spec;
}

}  // namespace

TEST_CASE("spec validation") {
    DatasetSpec spec = small_spec();
    CHECK_NOTHROW(spec.validate());

    spec.purity = 0.2;  // below 1/k = 0.25
    CHECK_THROWS_AS(spec.validate(), infeasible_purity_error);

    spec = small_spec();
    spec.l = 2;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

    spec = small_spec();
    spec.t = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

    spec = small_spec();
    spec.gaussians_max = 1;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("generation is bitwise deterministic") {
    const DatasetSpec spec = small_spec();
    const Dataset a = make_dataset(spec);
    const Dataset b = make_dataset(spec);
    CHECK(a.s_true == b.s_true);
    CHECK(a.c_true == b.c_true);
    CHECK(a.y_noisy == b.y_noisy);

    DatasetSpec other = spec;
    other.seed = 43;
    CHECK(make_dataset(other).y_noisy != a.y_noisy);
}

TEST_CASE("basis columns are nonnegative with unit maximum") {
    const Matrix s = gen_basis(small_spec());
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        CHECK(s.col(j).minCoeff() >= 0.0);
        CHECK(s.col(j).maxCoeff() == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("basis columns are spectrally distinct across seeds") {
    DatasetSpec spec;
    spec.l = 400;
    spec.t = 1;
    spec.k = 7;
    int distinct = 0;
    for (int seed = 0; seed < 100; ++seed) {
        spec.seed = static_cast<std::uint64_t>(seed);
        const Matrix s = gen_basis(spec);
        double min_angle = 180.0;
        for (int a = 0; a < spec.k; ++a)
            for (int b = a + 1; b < spec.k; ++b)
                min_angle = std::min(min_angle, oracle::angle_deg(s.col(a), s.col(b)));
        if (min_angle > 5.0) ++distinct;
    }
    CHECK(distinct >= 95);
}

TEST_CASE("coefficient columns respect the simplex and purity bound") {
    DatasetSpec spec = small_spec();
    spec.t = 1000;
    spec.k = 7;
    spec.l = 10;
    const Matrix c = gen_coeffs(spec);
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        CHECK(c.col(j).minCoeff() >= 0.0);
        CHECK(std::abs(c.col(j).sum() - 1.0) <= 1e-12);
        CHECK(c.col(j).maxCoeff() <= spec.purity);
    }
}

TEST_CASE("near-limit purity forces near-uniform columns") {
    DatasetSpec spec;
    spec.k = 2;
    spec.l = 4;
    spec.t = 50;
    spec.purity = 0.52;  // 1/k = 0.5
    const Matrix c = gen_coeffs(spec);
    // max <= p and sum-to-one imply every entry lies in [1-(k-1)p, p]
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        CHECK(c.col(j).maxCoeff() <= 0.52);
        CHECK(c.col(j).minCoeff() >= 1.0 - 0.52);
    }
}

TEST_CASE("purity one disables rejection and matches Dirichlet moments") {
    DatasetSpec spec;
    spec.k = 5;
    spec.l = 6;
    spec.t = 10000;
    spec.purity = 1.0;
    const Matrix c = gen_coeffs(spec);
    // flat Dirichlet: mean 1/k, var (1/k)(1 - 1/k)/(k + 1)
    const double mean = 1.0 / spec.k;
    const double stderr_mean =
        std::sqrt(mean * (1.0 - mean) / (spec.k + 1.0) / static_cast<double>(spec.t));
    for (int i = 0; i < spec.k; ++i) {
        const double got = c.row(i).mean();
        CHECK(std::abs(got - mean) < 3.0 * stderr_mean);
    }
}

TEST_CASE("hopeless purity trips the acceptance probe") {
    DatasetSpec spec;
    spec.k = 7;
    spec.l = 10;
    spec.t = 10;
    spec.purity = 1.0 / 7.0 + 1e-9;
    CHECK_THROWS_AS(gen_coeffs(spec), infeasible_purity_error);
}

TEST_CASE("noise injection hits the target SNR") {
    DatasetSpec spec;
    spec.l = 100;
    spec.t = 1000;
    spec.k = 4;
    spec.seed = 7;
    const Matrix s = gen_basis(spec);
    const Matrix c = gen_coeffs(spec);
    const Matrix clean = s * c;

    SECTION("infinite SNR is the identity") {
        const Matrix out =
            add_noise(clean, std::numeric_limits<double>::infinity(), spec.seed);
        CHECK(out == clean);
    }
    SECTION("15 dB realized within 0.2 dB") {
        const Matrix noisy = add_noise(clean, 15.0, spec.seed);
        const double realized =
            10.0 * std::log10(clean.squaredNorm() / (noisy - clean).squaredNorm());
        CHECK(std::abs(realized - 15.0) < 0.2);
    }
    SECTION("same seed, same noise") {
        CHECK(add_noise(clean, 15.0, 5) == add_noise(clean, 15.0, 5));
        CHECK(add_noise(clean, 15.0, 5) != add_noise(clean, 15.0, 6));
    }
}

TEST_CASE("noiseless data lies exactly in the projected true simplex") {
    DatasetSpec spec = small_spec();
    spec.snr_db = std::numeric_limits<double>::infinity();
    spec.t = 150;
    const Dataset ds = make_dataset(spec);

    const AffineBasis basis = fit_batch(ds.y_clean, spec.k);
    Matrix vertices(spec.k, spec.k);
    for (int i = 0; i < spec.k; ++i) vertices.col(i) = project(basis, ds.s_true.col(i));
    const SimplexChart chart = SimplexChart::from_vertices(vertices);
    ToleranceConfig strict;
    strict.eps1 = strict.eps2 = 0.0;
    for (int j = 0; j < spec.t; ++j) {
        const Vector c = barycentric(chart, project(basis, ds.y_clean.col(j)));
        CHECK(g_min(c) >= -1e-8);
        CHECK(std::abs(h_gap(c)) <= 1e-8);
    }
}
