#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "ossmf/metrics.hpp"
#include "ossmf/pipeline.hpp"
#include "ossmf/rng.hpp"
#include "test_oracles.hpp"

using namespace ossmf;

namespace {

Matrix random_columns(CounterRng& rng, int l, int k) {
    Matrix m(l, k);
    for (int i = 0; i < l; ++i)
        for (int j = 0; j < k; ++j) m(i, j) = std::abs(rng.next_gaussian()) + 0.01;
    return m;
}

}  // namespace

TEST_CASE("match_vertices identity and reversal") {
    CounterRng rng(1, 300);
    const Matrix s = random_columns(rng, 10, 4);
    const auto id = match_vertices(s, s);
    for (int i = 0; i < 4; ++i) CHECK(id[i] == i);

    const Matrix reversed = s.rowwise().reverse();
    const auto rev = match_vertices(s, reversed);
    for (int i = 0; i < 4; ++i) CHECK(rev[i] == 3 - i);
}

TEST_CASE("match_vertices equals the exhaustive oracle on random instances") {
    for (int seed = 0; seed < 20; ++seed) {
        CounterRng rng(seed, 301);
        const Matrix ref = random_columns(rng, 8, 4);
        const Matrix est = random_columns(rng, 8, 4);
        const auto perm = match_vertices(ref, est);

        // independent exhaustive search over all 4! assignments
        std::vector<int> idx(4);
        std::iota(idx.begin(), idx.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        std::vector<int> want;
        do {
            double total = 0.0;
            for (int i = 0; i < 4; ++i) total += oracle::angle_deg(ref.col(i), est.col(idx[i]));
            if (total < best) {
                best = total;
                want = idx;
            }
        } while (std::next_permutation(idx.begin(), idx.end()));

        double got = 0.0;
        for (int i = 0; i < 4; ++i) got += oracle::angle_deg(ref.col(i), est.col(perm[i]));
        CHECK(got == Catch::Approx(best).margin(1e-10));
    }
}

TEST_CASE("hungarian assignment agrees with brute force") {
    for (int seed = 0; seed < 50; ++seed) {
        CounterRng rng(seed, 302);
        const int k = 6;
        Matrix cost(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) cost(i, j) = rng.next_unit() * 90.0;
        const auto fast = ossmf::detail::assign_hungarian(cost);
        const auto slow = ossmf::detail::assign_exhaustive(cost);
        double fast_cost = 0.0, slow_cost = 0.0;
        for (int i = 0; i < k; ++i) {
            fast_cost += cost(i, fast[i]);
            slow_cost += cost(i, slow[i]);
        }
        CHECK(fast_cost == Catch::Approx(slow_cost).margin(1e-9));
    }
}

TEST_CASE("match_vertices uses the optimal assignment above the exhaustive cutoff") {
    CounterRng rng(5, 303);
    const int k = 9;  // Hungarian path
    const Matrix ref = random_columns(rng, 12, k);
    Matrix est(12, k);
    std::vector<int> shuffle(k);
    std::iota(shuffle.begin(), shuffle.end(), 0);
    for (int i = k - 1; i > 0; --i)
        std::swap(shuffle[i], shuffle[rng.next_below(i + 1)]);
    for (int i = 0; i < k; ++i) est.col(shuffle[i]) = ref.col(i);
    const auto perm = match_vertices(ref, est);
    for (int i = 0; i < k; ++i) CHECK(perm[i] == shuffle[i]);
}

TEST_CASE("asad identities") {
    CounterRng rng(2, 304);
    const Matrix s = random_columns(rng, 12, 3);
    CHECK(asad(s, s) == Catch::Approx(0.0).margin(1e-12));
    CHECK(asad(s, (2.0 * s).eval()) == Catch::Approx(0.0).margin(1e-9));

    Matrix ortho_ref(2, 2), ortho_est(2, 2);
    ortho_ref << 1, 0, 0, 1;
    ortho_est << 0, 1, 1, 0;
    CHECK(asad(ortho_ref, ortho_est) == Catch::Approx(90.0));
}

TEST_CASE("asad is invariant under simultaneous permutation with re-matching") {
    CounterRng rng(3, 305);
    const Matrix ref = random_columns(rng, 10, 4);
    const Matrix est = random_columns(rng, 10, 4);
    const double base = asad(ref, apply_matching(est, match_vertices(ref, est)));

    Matrix ref_p(10, 4), est_p(10, 4);
    const int perm[4] = {2, 0, 3, 1};
    for (int i = 0; i < 4; ++i) {
        ref_p.col(i) = ref.col(perm[i]);
        est_p.col(i) = est.col(perm[i]);
    }
    const double permuted = asad(ref_p, apply_matching(est_p, match_vertices(ref_p, est_p)));
    CHECK(base == Catch::Approx(permuted).margin(1e-10));
}

TEST_CASE("rmse identities") {
    CounterRng rng(4, 306);
    Matrix c(3, 20);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 20; ++j) c(i, j) = rng.next_unit();

    CHECK(rmse(c, c) == 0.0);
    CHECK(rmse(c, (c.array() + 0.1).matrix().eval()) == Catch::Approx(0.1).margin(1e-12));

    Matrix ref(2, 1), est(2, 1);
    ref << 1, 0;
    est << 0, 1;
    CHECK(rmse(ref, est) == Catch::Approx(1.0));

    Matrix delta(3, 20);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 20; ++j) delta(i, j) = rng.next_gaussian();
    CHECK(rmse(c, (c + delta).eval()) ==
          Catch::Approx(delta.norm() / std::sqrt(3.0 * 20.0)).margin(1e-12));
}

TEST_CASE("shape mismatches are contract errors") {
    Matrix a(3, 2), b(3, 3);
    a.setOnes();
    b.setOnes();
    CHECK_THROWS_AS(match_vertices(a, b), std::invalid_argument);
    CHECK_THROWS_AS(asad(a, b), std::invalid_argument);
    CHECK_THROWS_AS(rmse(a, b), std::invalid_argument);
    CHECK_THROWS_AS(spectral_angle_deg(Vector::Zero(3), Vector::Ones(3)),
                    std::invalid_argument);
}

TEST_CASE("evaluate_checkpoint on a noiseless stream reaches the ground truth") {
    DatasetSpec spec;
    spec.l = 40;
    spec.t = 400;
    spec.k = 3;
    spec.purity = 1.0;
    spec.snr_db = std::numeric_limits<double>::infinity();
    spec.seed = 11;

    Dataset ds;
    ds.spec = spec;
    ds.s_true = gen_basis(spec);
    CounterRng rng(spec.seed, 77);
    ds.c_true = oracle::facet_rich_coeffs(spec.k, spec.t, 0.03, rng);
    ds.y_clean = ds.s_true * ds.c_true;
    ds.y_noisy = ds.y_clean;

    RunConfig cfg;
    cfg.k = spec.k;
    cfg.finalize();

    const AffineBasis basis = fit_batch(ds.y_noisy.leftCols(cfg.init_batch_size), spec.k);
    EngineState state = new_engine(
        project_columns(basis, ds.y_noisy.leftCols(cfg.init_batch_size)), cfg.tol, cfg.mvcu);
    for (Eigen::Index j = cfg.init_batch_size; j < spec.t; ++j)
        step(state, project(basis, ds.y_noisy.col(j)));

    const EvalRecord record = evaluate_checkpoint(ds, basis, state, cfg.abundance);
    CHECK(record.t == spec.t);
    CHECK(record.asad_deg < 1e-2);
    CHECK(record.rmse < 1e-4);
    CHECK(record.relevant_count > 0);

    // rmse recomputation audit
    const Matrix lifted = lift(basis, estimate(state));
    const auto perm = match_vertices(ds.s_true, lifted);
    const Matrix matched = apply_matching(lifted, perm);
    const Matrix c_est = solve_coeffs(matched, ds.y_noisy, cfg.abundance);
    CHECK(record.rmse == Catch::Approx(rmse(ds.c_true, c_est)).margin(1e-12));
}

TEST_CASE("evaluate_checkpoint rejects mismatched dimensions") {
    DatasetSpec spec;
    spec.l = 20;
    spec.t = 60;
    spec.k = 3;
    spec.seed = 3;
    const Dataset ds = make_dataset(spec);
    const AffineBasis basis = fit_batch(ds.y_noisy, spec.k);

    RunConfig cfg;
    cfg.k = 4;  // wrong rank on purpose
    cfg.init_batch_size = 40;
    cfg.finalize();
    const AffineBasis wrong = fit_batch(ds.y_noisy, 4);
    EngineState state =
        new_engine(project_columns(wrong, ds.y_noisy.leftCols(40)), cfg.tol, cfg.mvcu);
    CHECK_THROWS_AS(evaluate_checkpoint(ds, basis, state, cfg.abundance),
                    std::invalid_argument);
}
