#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "ossmf/geometry.hpp"
#include "ossmf/mvcu.hpp"
#include "ossmf/rng.hpp"
#include "test_oracles.hpp"

using namespace ossmf;

namespace {

/// Random points on the sum-to-one line in R^2.
Matrix line_points(CounterRng& rng, int n) {
    Matrix ys(2, n);
    for (int j = 0; j < n; ++j) {
        const double c = rng.next_unit();
        ys.col(j) << c, 1.0 - c;
    }
    return ys;
}

/// Random triangle in sum-to-one coordinates of R^3 plus samples that pin it:
/// near-corner points on every edge and interior fill.
struct TriangleInstance {
    Matrix vertices;  // 3 x 3
    Matrix points;    // 3 x n
};

TriangleInstance pinned_triangle(CounterRng& rng, int n) {
    TriangleInstance inst;
    inst.vertices.resize(3, 3);
    for (;;) {
        for (int c = 0; c < 3; ++c) inst.vertices.col(c) = oracle::dirichlet_column(rng, 3);
        const Vector ctr = inst.vertices.rowwise().mean();
        for (int c = 0; c < 3; ++c)
            inst.vertices.col(c) = ctr + 2.0 * (inst.vertices.col(c) - ctr);
        if (std::abs(inst.vertices.determinant()) > 0.05) break;
    }
    inst.points.resize(3, n);
    int idx = 0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            if (a == b) continue;
            for (double t : {0.03, 0.5, 0.97})
                inst.points.col(idx++) =
                    inst.vertices.col(a) * (1.0 - t) + inst.vertices.col(b) * t;
        }
    while (idx < n)
        inst.points.col(idx++) = inst.vertices * oracle::dirichlet_column(rng, 3);
    return inst;
}

Matrix oracle_triangle(const Matrix& points) {
    std::vector<Eigen::Vector2d> flat;
    for (Eigen::Index j = 0; j < points.cols(); ++j)
        flat.push_back({points(0, j), points(1, j)});
    Eigen::Matrix<double, 2, 3> tri;
    REQUIRE(oracle::min_area_flush_triangle(oracle::convex_hull(flat), &tri));
    Matrix out(3, 3);
    for (int c = 0; c < 3; ++c) out.col(c) << tri(0, c), tri(1, c), 1.0 - tri(0, c) - tri(1, c);
    return out;
}

}  // namespace

TEST_CASE("objective is the negated log-determinant") {
    CHECK(objective(SimplexChart::from_q(Matrix::Identity(3, 3))) ==
          Catch::Approx(0.0).margin(1e-14));
    Matrix q = Matrix::Zero(2, 2);
    q(0, 0) = 2.0;
    q(1, 1) = 1.0;
    CHECK(objective(SimplexChart::from_q(q)) == Catch::Approx(-std::log(2.0)));
    q(0, 0) = q(1, 1) = 0.5;
    CHECK(objective(SimplexChart::from_q(q)) == Catch::Approx(-std::log(0.25)));
}

TEST_CASE("feasibility_violation reports the worst residual") {
    const auto eye = SimplexChart::from_q(Matrix::Identity(2, 2));
    Matrix inside(2, 1);
    inside << 0.5, 0.5;
    CHECK(feasibility_violation(eye, inside) == Catch::Approx(0.0).margin(1e-15));
    Matrix negative(2, 1);
    negative << -0.1, 1.1;
    CHECK(feasibility_violation(eye, negative) == Catch::Approx(0.1));
    Matrix oversum(2, 1);
    oversum << 0.6, 0.6;
    CHECK(feasibility_violation(eye, oversum) == Catch::Approx(0.2));
    CHECK_THROWS_AS(feasibility_violation(eye, Matrix(2, 0)), std::invalid_argument);
}

TEST_CASE("solve recovers the extreme points in one dimension") {
    CounterRng rng(1, 100);
    const Matrix ys = line_points(rng, 3);
    const auto cfg = MvcuConfig::defaults(2);
    const auto result = solve(ys, init_from_batch(ys, cfg), cfg);
    REQUIRE(result.converged);

    int lo, hi;
    ys.row(0).minCoeff(&lo);
    ys.row(0).maxCoeff(&hi);
    const Matrix got = result.chart.s();
    const double direct = std::max((got.col(0) - ys.col(lo)).norm(),
                                   (got.col(1) - ys.col(hi)).norm());
    const double swapped = std::max((got.col(0) - ys.col(hi)).norm(),
                                    (got.col(1) - ys.col(lo)).norm());
    CHECK(std::min(direct, swapped) < 1e-4);
}

TEST_CASE("one-dimensional oracle equivalence across 100 seeds") {
    const auto cfg = MvcuConfig::defaults(2);
    for (int seed = 0; seed < 100; ++seed) {
        CounterRng rng(seed, 101);
        const Matrix ys = line_points(rng, 20 + static_cast<int>(rng.next_below(30)));
        const auto result = solve(ys, init_from_batch(ys, cfg), cfg);
        REQUIRE(result.converged);
        int lo, hi;
        ys.row(0).minCoeff(&lo);
        ys.row(0).maxCoeff(&hi);
        const Matrix got = result.chart.s();
        const double direct = std::max((got.col(0) - ys.col(lo)).norm(),
                                       (got.col(1) - ys.col(hi)).norm());
        const double swapped = std::max((got.col(0) - ys.col(hi)).norm(),
                                        (got.col(1) - ys.col(lo)).norm());
        INFO("seed " << seed);
        CHECK(std::min(direct, swapped) < 1e-4);
    }
}

TEST_CASE("vertex data is a fixed point of solve") {
    const int k = 4;
    const Matrix ys = Matrix::Identity(k, k);
    const auto warm = SimplexChart::from_q(Matrix::Identity(k, k));
    const auto result = solve(ys, warm, MvcuConfig::defaults(k));
    CHECK(result.converged);
    CHECK((result.chart.q() - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(result.objective == Catch::Approx(0.0).margin(1e-12));
    CHECK(result.max_violation < 1e-12);
}

TEST_CASE("triangle recovery matches the flush-candidate oracle") {
    CounterRng rng(7, 102);
    const auto inst = pinned_triangle(rng, 80);
    const auto cfg = MvcuConfig::defaults(3);
    const auto result = solve(inst.points, init_from_batch(inst.points, cfg), cfg);
    REQUIRE(result.converged);
    CHECK(result.max_violation <= 1e-6);

    const Matrix want = oracle_triangle(inst.points);
    CHECK(oracle::best_permutation_asad(want, result.chart.s()) < 0.5);
    // with corner-pinning samples the oracle coincides with the ground truth
    CHECK(oracle::best_permutation_asad(inst.vertices, result.chart.s()) < 0.5);
}

TEST_CASE("init_from_batch encloses the batch") {
    SECTION("identity batch") {
        const int k = 3;
        const auto chart = init_from_batch(Matrix::Identity(k, k), MvcuConfig::defaults(k));
        CHECK(feasibility_violation(chart, Matrix::Identity(k, k)) <= 1e-12);
    }
    SECTION("single point is degenerate") {
        Matrix one(2, 1);
        one << 0.5, 0.5;
        CHECK_THROWS_AS(init_from_batch(one, MvcuConfig::defaults(2)), degenerate_batch_error);
    }
    SECTION("collinear K = 3 batch is degenerate") {
        Matrix line(3, 5);
        for (int j = 0; j < 5; ++j) {
            const double t = j / 4.0;
            line.col(j) << t, 1.0 - t, 0.0;
        }
        CHECK_THROWS_AS(init_from_batch(line, MvcuConfig::defaults(3)), degenerate_batch_error);
    }
    SECTION("triangle batch: init is feasible and solve only improves") {
        CounterRng rng(3, 103);
        const auto inst = pinned_triangle(rng, 50);
        const auto cfg = MvcuConfig::defaults(3);
        const auto init = init_from_batch(inst.points, cfg);
        CHECK(feasibility_violation(init, inst.points) <= 1e-9);
        const auto result = solve(inst.points, init, cfg);
        CHECK(objective(init) >= result.objective - 1e-10);
        CHECK(oracle::best_permutation_asad(oracle_triangle(inst.points), result.chart.s()) <
              1.0);
    }
}

TEST_CASE("volume never increases from a feasible warm start") {
    CounterRng rng(9, 104);
    const auto cfg = MvcuConfig::defaults(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto inst = pinned_triangle(rng, 40);
        // dilate a feasible chart so the warm start has slack
        const auto base = init_from_batch(inst.points, cfg);
        Matrix s = base.s();
        const Vector centroid = s.rowwise().mean();
        Matrix dilated = centroid.replicate(1, 3) + 1.2 * (s.colwise() - centroid);
        const auto warm = SimplexChart::from_vertices(dilated);
        REQUIRE(feasibility_violation(warm, inst.points) == 0.0);

        const auto result = solve(inst.points, warm, cfg);
        CHECK(result.objective <= objective(warm) + 1e-10);
        CHECK(result.max_violation <= 1e-6);
        // enclosure at the robust tolerance
        ToleranceConfig tol;
        tol.eps1 = tol.eps2 = 1e-6;
        for (Eigen::Index j = 0; j < inst.points.cols(); ++j)
            CHECK(in_robust_simplex(result.chart, inst.points.col(j), tol));
    }
}

TEST_CASE("analytic gradient matches central differences away from kinks") {
    CounterRng rng(17, 105);
    const int k = 3;
    Matrix ys(k, 12);
    for (int j = 0; j < 12; ++j)
        for (int i = 0; i < k; ++i) ys(i, j) = rng.next_gaussian();
    const double lambda = 30.0;

    int checked = 0;
    while (checked < 10) {
        Matrix q(k, k);
        for (int i = 0; i < k * k; ++i) q(i / k, i % k) = rng.next_gaussian();
        q += 3.0 * Matrix::Identity(k, k);
        // keep away from hinge and sum kinks
        const Matrix c = q * ys;
        if (c.cwiseAbs().minCoeff() < 1e-3) continue;
        bool near_sum_kink = false;
        for (Eigen::Index j = 0; j < c.cols(); ++j)
            if (std::abs(1.0 - c.col(j).sum()) < 1e-3) near_sum_kink = true;
        if (near_sum_kink || !std::isfinite(penalized_objective(q, ys, lambda))) continue;

        const Matrix grad = penalized_gradient(q, ys, lambda);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                const double h = 1e-6 * std::max(1.0, std::abs(q(i, j)));
                Matrix qp = q, qm = q;
                qp(i, j) += h;
                qm(i, j) -= h;
                const double fd =
                    (penalized_objective(qp, ys, lambda) - penalized_objective(qm, ys, lambda)) /
                    (2.0 * h);
                CHECK(std::abs(fd - grad(i, j)) <=
                      1e-5 * std::max(1.0, std::abs(fd)));
            }
        ++checked;
    }
}

TEST_CASE("input order changes nothing beyond a column permutation") {
    CounterRng rng(23, 106);
    const auto inst = pinned_triangle(rng, 30);
    const auto cfg = MvcuConfig::defaults(3);
    const auto warm = init_from_batch(inst.points, cfg);

    const auto forward = solve(inst.points, warm, cfg);
    Matrix reversed = inst.points.rowwise().reverse();
    const auto backward = solve(reversed, warm, cfg);

    CHECK(forward.objective == Catch::Approx(backward.objective).margin(1e-8));
    CHECK(oracle::best_permutation_asad(forward.chart.s(), backward.chart.s()) < 1e-4);
}

TEST_CASE("result fields are coherent") {
    CounterRng rng(29, 107);
    const Matrix ys = line_points(rng, 10);
    const auto cfg = MvcuConfig::defaults(2);
    const auto result = solve(ys, init_from_batch(ys, cfg), cfg);
    CHECK(result.objective == Catch::Approx(-result.chart.log_abs_det_q()).margin(1e-10));
    CHECK(result.max_violation >= 0.0);
    CHECK(result.iters > 0);
}

TEST_CASE("budget exhaustion is reported, not thrown") {
    CounterRng rng(31, 108);
    const auto inst = pinned_triangle(rng, 40);
    MvcuConfig tiny = MvcuConfig::defaults(3);
    tiny.max_outer_iters = 1;
    tiny.max_inner_iters = 1;
    // a warm start that badly violates the constraints
    Matrix small = 0.05 * Matrix::Identity(3, 3);
    small += 0.3 * Matrix::Ones(3, 3);
    const auto result = solve(inst.points, SimplexChart::from_vertices(small), tiny);
    CHECK_FALSE(result.converged);
}

TEST_CASE("config validation") {
    auto cfg = MvcuConfig::defaults(4);
    CHECK(cfg.hinge_weight == Catch::Approx(40.0));
    CHECK_NOTHROW(cfg.validate());
    cfg.step_shrink = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = MvcuConfig::defaults(4);
    cfg.hinge_weight = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
