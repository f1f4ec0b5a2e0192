#pragma once

// Evaluation: optimal vertex matching, average spectral angle distance (in
// degrees), coefficient RMSE, and the checkpoint record tying them together.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ossmf/abundance.hpp"
#include "ossmf/datagen.hpp"
#include "ossmf/engine.hpp"
#include "ossmf/geometry.hpp"
#include "ossmf/subspace.hpp"

namespace ossmf {

struct EvalRecord {
    std::int64_t t = 0;
    double asad_deg = 0.0;
    double rmse = 0.0;
    double step_seconds = 0.0;
    bool updated = false;
    std::int64_t relevant_count = 0;
};

/// Angle between two vectors in degrees, cosine clamped to [-1, 1].
inline double spectral_angle_deg(const Vector& a, const Vector& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw std::invalid_argument("spectral_angle_deg: zero column");
    const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
    return std::acos(c) * 180.0 / std::numbers::pi;
}

namespace detail {

/// Exhaustive assignment in lexicographic order; first optimum wins.
inline std::vector<int> assign_exhaustive(const Matrix& cost) {
    const int k = static_cast<int>(cost.rows());
    std::vector<int> perm(k), best(k);
    std::iota(perm.begin(), perm.end(), 0);
    best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int i = 0; i < k; ++i) total += cost(i, perm[i]);
        if (total < best_cost) {
            best_cost = total;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// O(n^3) shortest-augmenting-path assignment (Jonker-Volgenant style) for
/// larger K.
inline std::vector<int> assign_hungarian(const Matrix& cost) {
    const int n = static_cast<int>(cost.rows());
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> matched(n + 1, 0);  // matched[col 1..n] = row
    std::vector<int> parent(n + 1, 0);

    for (int row = 1; row <= n; ++row) {
        matched[0] = row;
        int col0 = 0;
        std::vector<double> min_slack(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[col0] = true;
            const int row0 = matched[col0];
            double delta = inf;
            int col1 = -1;
            for (int col = 1; col <= n; ++col) {
                if (used[col]) continue;
                const double reduced = cost(row0 - 1, col - 1) - u[row0] - v[col];
                if (reduced < min_slack[col]) {
                    min_slack[col] = reduced;
                    parent[col] = col0;
                }
                if (min_slack[col] < delta) {
                    delta = min_slack[col];
                    col1 = col;
                }
            }
            for (int col = 0; col <= n; ++col) {
                if (used[col]) {
                    u[matched[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_slack[col] -= delta;
                }
            }
            col0 = col1;
        } while (matched[col0] != 0);
        for (; col0 != 0;) {
            const int col1 = parent[col0];
            matched[col0] = matched[col1];
            col0 = col1;
        }
    }

    std::vector<int> out(n, -1);
    for (int col = 1; col <= n; ++col)
        if (matched[col] > 0) out[matched[col] - 1] = col - 1;
    return out;
}

}  // namespace detail

/// Permutation p minimizing the total spectral angle of (ref_k, est_{p[k]})
/// pairs; exhaustive (lexicographic tie-break) for K <= 8, Hungarian above.
inline std::vector<int> match_vertices(const Matrix& s_ref, const Matrix& s_est) {
    if (s_ref.rows() != s_est.rows() || s_ref.cols() != s_est.cols())
        throw std::invalid_argument("match_vertices: shape mismatch");
    const int k = static_cast<int>(s_ref.cols());
    if (k == 0) throw std::invalid_argument("match_vertices: empty input");
    Matrix cost(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            cost(i, j) = spectral_angle_deg(s_ref.col(i), s_est.col(j));
    return k <= 8 ? detail::assign_exhaustive(cost) : detail::assign_hungarian(cost);
}

/// Mean spectral angle over already-matched column pairs, in degrees.
inline double asad(const Matrix& s_ref, const Matrix& s_est) {
    if (s_ref.rows() != s_est.rows() || s_ref.cols() != s_est.cols())
        throw std::invalid_argument("asad: shape mismatch");
    if (s_ref.cols() == 0) throw std::invalid_argument("asad: empty input");
    double total = 0.0;
    for (Eigen::Index j = 0; j < s_ref.cols(); ++j)
        total += spectral_angle_deg(s_ref.col(j), s_est.col(j));
    return total / static_cast<double>(s_ref.cols());
}

/// sqrt(||C - C_hat||_F^2 / (K T)).
inline double rmse(const Matrix& c_ref, const Matrix& c_est) {
    if (c_ref.rows() != c_est.rows() || c_ref.cols() != c_est.cols())
        throw std::invalid_argument("rmse: shape mismatch");
    if (c_ref.size() == 0) throw std::invalid_argument("rmse: empty input");
    return std::sqrt((c_ref - c_est).squaredNorm() / static_cast<double>(c_ref.size()));
}

/// Reorders the columns of m by the matching permutation so column k aligns
/// with reference column k.
inline Matrix apply_matching(const Matrix& m, const std::vector<int>& perm) {
    if (static_cast<int>(perm.size()) != m.cols())
        throw std::invalid_argument("apply_matching: permutation size mismatch");
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = m.col(perm[j]);
    return out;
}

/// Full checkpoint evaluation: lift the current vertices, match them to the
/// ground truth, then estimate coefficients on the full noisy data for the
/// RMSE. Timing and update fields are left for the caller to stamp.
inline EvalRecord evaluate_checkpoint(const Dataset& dataset, const AffineBasis& basis,
                                      const EngineState& state,
                                      const AbundanceConfig& abundance_cfg) {
    if (basis.k() != state.chart.k())
        throw std::invalid_argument("evaluate_checkpoint: basis/state dimension mismatch");
    if (dataset.s_true.rows() != basis.l() || dataset.s_true.cols() != basis.k())
        throw std::invalid_argument("evaluate_checkpoint: dataset dimension mismatch");

    const Matrix lifted = lift(basis, estimate(state));
    const auto perm = match_vertices(dataset.s_true, lifted);
    const Matrix matched = apply_matching(lifted, perm);

    EvalRecord record;
    record.t = state.t;
    record.relevant_count = static_cast<std::int64_t>(state.relevant.size());
    record.asad_deg = asad(dataset.s_true, matched);
    const Matrix c_est = solve_coeffs(matched, dataset.y_noisy, abundance_cfg);
    record.rmse = rmse(dataset.c_true, c_est);
    return record;
}

}  // namespace ossmf
