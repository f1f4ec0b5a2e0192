#pragma once

// Warm-startable minimum-volume constrained unmixing. The solver minimizes
//
//     F(Q) = -log|det Q| + lambda * sum_j [ sum_i max(0, -(Q y_j)_i) + |1 - 1' Q y_j| ]
//
// by projected quasi-Newton (L-BFGS with Armijo backtracking) restricted to
// the affine manifold {Q : 1' Q = r'}, where r is the least-squares hull
// functional of the input points. On that manifold the sum-to-one residuals
// are constants of the data, so the descent only trades log-volume against
// the nonnegativity hinges. Inside the loop the hinge is replaced by a C^1
// one-sided Huber surrogate whose band shrinks geometrically between rounds;
// iterates are scored on the exact objective, so the returned chart carries
// no smoothing bias. The penalty weight follows a doubling continuation
// schedule while the worst constraint violation stalls.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ossmf/errors.hpp"
#include "ossmf/geometry.hpp"

namespace ossmf {

struct MvcuConfig {
    double hinge_weight = 20.0;  ///< lambda; defaults(k) sets 10 * k
    int max_outer_iters = 40;
    int max_inner_iters = 200;
    double grad_tol = 1e-9;
    double step_shrink = 0.5;
    double min_step = 1e-14;

    static MvcuConfig defaults(int k) {
        MvcuConfig cfg;
        cfg.hinge_weight = 10.0 * static_cast<double>(k > 0 ? k : 1);
        return cfg;
    }

    void validate() const {
        if (!(hinge_weight > 0.0)) throw std::invalid_argument("hinge_weight must be positive");
        if (max_outer_iters <= 0) throw std::invalid_argument("max_outer_iters must be positive");
        if (max_inner_iters <= 0) throw std::invalid_argument("max_inner_iters must be positive");
        if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");
        if (!(step_shrink > 0.0 && step_shrink < 1.0))
            throw std::invalid_argument("step_shrink must lie strictly inside (0, 1)");
        if (!(min_step > 0.0)) throw std::invalid_argument("min_step must be positive");
    }
};

struct MvcuResult {
    SimplexChart chart;
    double objective = 0.0;       ///< -log|det Q|
    double max_violation = 0.0;   ///< worst g/h residual over the inputs
    int iters = 0;
    bool converged = false;
};

/// Volume objective -log|det Q|.
inline double objective(const SimplexChart& chart) { return -chart.log_abs_det_q(); }

/// Worst constraint residual max_j max(-g(Qy_j), |h(Qy_j)|), clamped at 0.
inline double feasibility_violation(const SimplexChart& chart, const Matrix& ys) {
    if (ys.cols() == 0) throw std::invalid_argument("feasibility_violation: empty input");
    if (ys.rows() != chart.k())
        throw std::invalid_argument("feasibility_violation: dimension mismatch");
    const Matrix c = chart.q() * ys;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        worst = std::max(worst, -c.col(j).minCoeff());
        worst = std::max(worst, std::abs(1.0 - c.col(j).sum()));
    }
    return worst;
}

/// Penalized objective evaluated at a raw matrix q. Returns +inf outside the
/// well-conditioned nonsingular region.
inline double penalized_objective(const Matrix& q, const Matrix& ys, double lambda) {
    constexpr double floor_rcond = 1e-11;
    Eigen::PartialPivLU<Matrix> lu(q);
    const double log_det = detail::log_abs_det_from_lu(lu);
    if (!std::isfinite(log_det)) return std::numeric_limits<double>::infinity();
    const Matrix inv = lu.inverse();
    if (!inv.allFinite()) return std::numeric_limits<double>::infinity();
    const double rcond = 1.0 / (detail::one_norm(q) * detail::one_norm(inv));
    if (!(rcond >= floor_rcond)) return std::numeric_limits<double>::infinity();

    const Matrix c = q * ys;
    double penalty = 0.0;
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            if (c(i, j) < 0.0) penalty -= c(i, j);
        penalty += std::abs(1.0 - c.col(j).sum());
    }
    return -log_det + lambda * penalty;
}

/// Analytic gradient of penalized_objective. Exact away from hinge kinks;
/// at a kink the inactive branch is used.
inline Matrix penalized_gradient(const Matrix& q, const Matrix& ys, double lambda) {
    Eigen::PartialPivLU<Matrix> lu(q);
    Matrix grad = -lu.inverse().transpose();
    const Matrix c = q * ys;
    Vector h_sign(c.cols());
    Matrix active = Matrix::Zero(c.rows(), c.cols());
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        const double h = 1.0 - c.col(j).sum();
        h_sign[j] = h > 0.0 ? 1.0 : (h < 0.0 ? -1.0 : 0.0);
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            if (c(i, j) < 0.0) active(i, j) = 1.0;
    }
    grad.noalias() -= lambda * active * ys.transpose();
    grad.noalias() -= lambda * Vector::Ones(q.rows()) * (ys * h_sign).transpose();
    return grad;
}

namespace detail {

/// Projects a matrix onto the tangent directions of {Q : 1' Q = r'}, i.e.
/// removes per-column means.
inline void remove_column_means(Matrix& m) {
    m.rowwise() -= m.colwise().mean();
}

struct MvcuCandidate {
    Matrix q;
    double obj = std::numeric_limits<double>::infinity();
    double viol = std::numeric_limits<double>::infinity();
    bool set = false;
};

inline double raw_objective(const Matrix& q) {
    Eigen::PartialPivLU<Matrix> lu(q);
    return -log_abs_det_from_lu(lu);
}

inline double raw_violation(const Matrix& q, const Matrix& ys) {
    const Matrix c = q * ys;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        worst = std::max(worst, -c.col(j).minCoeff());
        worst = std::max(worst, std::abs(1.0 - c.col(j).sum()));
    }
    return worst;
}

inline double raw_g_violation(const Matrix& q, const Matrix& ys) {
    const Matrix c = q * ys;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < c.cols(); ++j)
        worst = std::max(worst, -c.col(j).minCoeff());
    return worst;
}

/// One-sided Huber surrogate of max(0, -c) with smoothing band mu:
/// zero above +mu, linear below -mu, quadratic blend between.
inline double smooth_hinge(double c, double mu) {
    if (c >= mu) return 0.0;
    if (c <= -mu) return -c;
    const double t = mu - c;
    return t * t / (4.0 * mu);
}

inline double smooth_hinge_slope(double c, double mu) {
    if (c >= mu) return 0.0;
    if (c <= -mu) return -1.0;
    return -(mu - c) / (2.0 * mu);
}

inline double smoothed_objective(const Matrix& q, const Matrix& ys, double lambda,
                                 double mu) {
    constexpr double floor_rcond = 1e-11;
    Eigen::PartialPivLU<Matrix> lu(q);
    const double log_det = log_abs_det_from_lu(lu);
    if (!std::isfinite(log_det)) return std::numeric_limits<double>::infinity();
    const Matrix inv = lu.inverse();
    if (!inv.allFinite()) return std::numeric_limits<double>::infinity();
    const double rcond = 1.0 / (one_norm(q) * one_norm(inv));
    if (!(rcond >= floor_rcond)) return std::numeric_limits<double>::infinity();

    const Matrix c = q * ys;
    double penalty = 0.0;
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            penalty += smooth_hinge(c(i, j), mu);
        penalty += std::abs(1.0 - c.col(j).sum());
    }
    return -log_det + lambda * penalty;
}

inline Matrix smoothed_gradient(const Matrix& q, const Matrix& ys, double lambda,
                                double mu) {
    Eigen::PartialPivLU<Matrix> lu(q);
    Matrix grad = -lu.inverse().transpose();
    const Matrix c = q * ys;
    Matrix slope(c.rows(), c.cols());
    Vector h_sign(c.cols());
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        const double h = 1.0 - c.col(j).sum();
        h_sign[j] = h > 0.0 ? 1.0 : (h < 0.0 ? -1.0 : 0.0);
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            slope(i, j) = smooth_hinge_slope(c(i, j), mu);
    }
    grad.noalias() += lambda * slope * ys.transpose();
    grad.noalias() -= lambda * Vector::Ones(q.rows()) * (ys * h_sign).transpose();
    return grad;
}

/// Lexicographic preference: near-feasible (viol <= 1e-6) beats infeasible,
/// then lower objective, then lower violation.
inline bool better_candidate(const MvcuCandidate& a, const MvcuCandidate& b) {
    if (!b.set) return true;
    if (!a.set) return false;
    const bool fa = a.viol <= 1e-6;
    const bool fb = b.viol <= 1e-6;
    if (fa != fb) return fa;
    if (fa) return a.obj < b.obj;
    if (a.viol != b.viol) return a.viol < b.viol;
    return a.obj < b.obj;
}

/// Uniform dilation about the vertex centroid that clears residual
/// nonnegativity violations exactly. Returns nothing when the dilation
/// cannot be built.
inline std::optional<Matrix> dilate_to_enclose(const Matrix& q, const Matrix& ys) {
    Eigen::PartialPivLU<Matrix> lu(q);
    Matrix s = lu.inverse();
    if (!s.allFinite()) return std::nullopt;
    const Vector centroid = s.rowwise().mean();
    double g_worst = raw_g_violation(q, ys);
    double tau = static_cast<double>(q.rows()) * g_worst * (1.0 + 1e-9) + 1e-16;
    for (int attempt = 0; attempt < 6; ++attempt) {
        Matrix dilated = centroid.replicate(1, s.cols()) + (1.0 + tau) * (s.colwise() - centroid);
        Eigen::PartialPivLU<Matrix> lu2(dilated);
        Matrix q2 = lu2.inverse();
        if (!q2.allFinite()) return std::nullopt;
        if (raw_g_violation(q2, ys) <= 0.0) return q2;
        tau = tau * 2.0 + 1e-15;
    }
    return std::nullopt;
}

}  // namespace detail

/// Solves the intermediate problem on ys (columns are reduced observations)
/// starting from warm_start. Returns the best chart seen, preferring
/// near-feasible iterates of lower volume; when the warm start is feasible
/// the returned objective never exceeds the warm-start objective.
inline MvcuResult solve(const Matrix& ys, const SimplexChart& warm_start,
                        const MvcuConfig& cfg) {
    cfg.validate();
    const int k = warm_start.k();
    if (ys.rows() != k) throw std::invalid_argument("solve: dimension mismatch");
    if (ys.cols() == 0) throw std::invalid_argument("solve: empty input");
    if (!ys.allFinite()) throw std::invalid_argument("solve: non-finite observations");

    const Vector r = hull_functional(ys);
    const Vector ones = Vector::Ones(k);

    // Restrict the warm start to the sum-to-one manifold.
    Matrix q = warm_start.q();
    q.noalias() += (1.0 / k) * ones * (r.transpose() - ones.transpose() * q);

    double lambda = cfg.hinge_weight;
    constexpr double lambda_cap = 1e6;

    const double warm_obj = detail::raw_objective(q);
    const double warm_viol = std::isfinite(warm_obj)
                                 ? detail::raw_violation(q, ys)
                                 : std::numeric_limits<double>::infinity();
    const bool warm_exact_feasible = warm_viol <= 0.0;

    detail::MvcuCandidate best;
    auto consider = [&](const Matrix& cand) {
        const double obj = detail::raw_objective(cand);
        if (!std::isfinite(obj)) return;
        detail::MvcuCandidate c{cand, obj, detail::raw_violation(cand, ys), true};
        if (detail::better_candidate(c, best)) best = std::move(c);
    };
    consider(q);

    if (!std::isfinite(penalized_objective(q, ys, lambda))) {
        // Projection landed on a (near-)singular matrix; nudge along the
        // identity direction restricted to the manifold.
        Matrix nudge = Matrix::Identity(k, k);
        nudge.noalias() += (1.0 / k) * ones * (r.transpose() - ones.transpose() * nudge);
        double blend = 0.5;
        for (int i = 0; i < 60 && !std::isfinite(penalized_objective(q, ys, lambda)); ++i) {
            q = (1.0 - blend) * warm_start.q() + blend * nudge;
            q.noalias() += (1.0 / k) * ones * (r.transpose() - ones.transpose() * q);
            blend = 0.5 * (blend + 1.0);
        }
    }

    const int memory = 8;
    std::vector<Matrix> s_hist, y_hist;
    std::vector<double> rho_hist;

    constexpr double mu_start = 1e-2;
    constexpr double mu_min = 1e-8;
    double mu = mu_start;

    double f_cur = detail::smoothed_objective(q, ys, lambda, mu);
    Matrix g_cur = detail::smoothed_gradient(q, ys, lambda, mu);
    detail::remove_column_means(g_cur);

    int total_iters = 0;
    bool converged = false;
    double prev_outer_obj = std::numeric_limits<double>::infinity();
    double prev_outer_viol = std::numeric_limits<double>::infinity();

    for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
        int accepted = 0;
        int stagnant = 0;
        for (int inner = 0; inner < cfg.max_inner_iters; ++inner) {
            ++total_iters;
            const double g_norm = g_cur.norm();
            if (g_norm <= cfg.grad_tol * std::max(1.0, std::abs(f_cur))) break;

            // Two-loop L-BFGS direction on the flattened matrix.
            Matrix dir = -g_cur;
            const int hist = static_cast<int>(s_hist.size());
            std::vector<double> alpha(hist);
            for (int i = hist - 1; i >= 0; --i) {
                alpha[i] = rho_hist[i] * s_hist[i].cwiseProduct(dir).sum();
                dir.noalias() -= alpha[i] * y_hist[i];
            }
            if (hist > 0) {
                const double yy = y_hist.back().squaredNorm();
                const double sy = 1.0 / rho_hist.back();
                if (yy > 0.0) dir *= sy / yy;
            }
            for (int i = 0; i < hist; ++i) {
                const double beta = rho_hist[i] * y_hist[i].cwiseProduct(dir).sum();
                dir.noalias() += (alpha[i] - beta) * s_hist[i];
            }
            detail::remove_column_means(dir);

            double gd = g_cur.cwiseProduct(dir).sum();
            if (!(gd < 0.0)) {
                dir = -g_cur;
                gd = -g_cur.squaredNorm();
                if (!(gd < 0.0)) break;
            }

            // Armijo backtracking; +inf evaluations reject steps that cross
            // or approach singularity.
            double step = 1.0;
            double f_new = std::numeric_limits<double>::infinity();
            Matrix q_new;
            bool moved = false;
            while (step >= cfg.min_step) {
                q_new = q + step * dir;
                f_new = detail::smoothed_objective(q_new, ys, lambda, mu);
                if (f_new <= f_cur + 1e-4 * step * gd) {
                    moved = true;
                    break;
                }
                step *= cfg.step_shrink;
            }
            if (!moved) break;

            Matrix g_new = detail::smoothed_gradient(q_new, ys, lambda, mu);
            detail::remove_column_means(g_new);

            Matrix s_step = q_new - q;
            Matrix y_step = g_new - g_cur;
            const double sy = s_step.cwiseProduct(y_step).sum();
            if (sy > 1e-12 * s_step.norm() * y_step.norm()) {
                s_hist.push_back(std::move(s_step));
                y_hist.push_back(std::move(y_step));
                rho_hist.push_back(1.0 / sy);
                if (static_cast<int>(s_hist.size()) > memory) {
                    s_hist.erase(s_hist.begin());
                    y_hist.erase(y_hist.begin());
                    rho_hist.erase(rho_hist.begin());
                }
            }
            const double f_drop = f_cur - f_new;
            q = std::move(q_new);
            f_cur = f_new;
            g_cur = std::move(g_new);
            consider(q);
            ++accepted;
            // Give up on this smoothing level once steps stop paying; only
            // the final level needs tight convergence.
            const double stall_tol = mu > mu_min ? 1e-9 : 1e-11;
            if (f_drop <= stall_tol * std::max(1.0, std::abs(f_cur))) {
                if (++stagnant >= 2) break;
            } else {
                stagnant = 0;
            }
        }

        const double obj = detail::raw_objective(q);
        const double viol = detail::raw_violation(q, ys);
        const bool refined = mu <= mu_min;
        const bool stable = std::abs(obj - prev_outer_obj) <= 1e-8 * std::max(1.0, std::abs(obj));
        if (refined && viol < 1e-6 && (stable || accepted == 0)) {
            converged = true;
            break;
        }
        if (refined && accepted == 0 && lambda >= lambda_cap) break;

        bool params_changed = false;
        if (!refined) {
            mu = std::max(mu * 0.1, mu_min);
            params_changed = true;
        }
        if (refined && viol >= 1e-6 && (viol > 0.5 * prev_outer_viol || accepted == 0)) {
            lambda = std::min(lambda * 2.0, lambda_cap);
            params_changed = true;
        }
        if (params_changed) {
            // Surrogate changed: restart curvature history and refresh the
            // cached objective/gradient.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            f_cur = detail::smoothed_objective(q, ys, lambda, mu);
            g_cur = detail::smoothed_gradient(q, ys, lambda, mu);
            detail::remove_column_means(g_cur);
        }
        prev_outer_obj = obj;
        prev_outer_viol = viol;
    }

    if (!best.set) throw singular_chart_error("solve: no usable iterate", 0.0);

    // Exact-enclosure polish: clear sub-1e-4 nonnegativity residuals by a
    // minimal dilation, unless that would break warm-start monotonicity.
    const double g_worst = detail::raw_g_violation(best.q, ys);
    if (g_worst > 0.0 && g_worst <= 1e-4) {
        if (auto polished = detail::dilate_to_enclose(best.q, ys)) {
            const double pol_obj = detail::raw_objective(*polished);
            if (std::isfinite(pol_obj) && !(warm_exact_feasible && pol_obj > warm_obj))
                best = detail::MvcuCandidate{*polished, pol_obj,
                                             detail::raw_violation(*polished, ys), true};
        }
    }

    SimplexChart chart = SimplexChart::from_q(best.q);
    MvcuResult result{std::move(chart), 0.0, 0.0, total_iters, converged};
    result.objective = -result.chart.log_abs_det_q();
    result.max_violation = feasibility_violation(result.chart, ys);
    return result;
}

/// Builds a feasible starting chart for a batch: a regular simplex centered
/// at the batch mean on the batch's affine hull, dilated until it encloses
/// every point (plus 5% slack), then refined by one solve call.
inline SimplexChart init_from_batch(const Matrix& ys, const MvcuConfig& cfg) {
    const int k = static_cast<int>(ys.rows());
    if (k < 1) throw std::invalid_argument("init_from_batch: empty dimension");
    if (ys.cols() < k)
        throw degenerate_batch_error("init_from_batch: fewer than K observations");
    if (!ys.allFinite()) throw std::invalid_argument("init_from_batch: non-finite observations");

    const Vector r = hull_functional(ys);
    const Vector mean = ys.rowwise().mean();
    const double den = r.dot(mean);
    if (std::abs(den) < 1e-12)
        throw degenerate_batch_error("init_from_batch: batch mean orthogonal to hull normalizer");
    const Vector center = mean / den;

    // Affine-hull directions from the centered batch.
    Matrix centered = ys.colwise() - mean;
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU);
    const auto& sigma = svd.singularValues();
    if (sigma.size() < k - 1 || sigma[0] <= 0.0 ||
        (k >= 2 && sigma[k - 2] <= sigma[0] * 1e-10))
        throw degenerate_batch_error("init_from_batch: batch affinely degenerate");
    const Matrix hull_dirs = svd.matrixU().leftCols(k - 1);

    // Unit directions from the centroid of a regular simplex to its vertices.
    Matrix corner = Matrix::Identity(k, k);
    corner.array() -= 1.0 / k;
    Eigen::BDCSVD<Matrix> corner_svd(corner, Eigen::ComputeThinU);
    const Matrix null_free = corner_svd.matrixU().leftCols(k - 1);
    Matrix directions(k - 1, k);
    for (int i = 0; i < k; ++i) {
        Vector w = null_free.transpose() * corner.col(i);
        directions.col(i) = w / w.norm();
    }

    double radius = 0.0;
    for (Eigen::Index j = 0; j < ys.cols(); ++j)
        radius = std::max(radius, (ys.col(j) - center).norm());
    if (radius <= 0.0) radius = 1.0;

    auto build = [&](double rho) -> std::optional<SimplexChart> {
        Matrix vertices(k, k);
        for (int i = 0; i < k; ++i) {
            Vector v = center + rho * (hull_dirs * directions.col(i));
            const double pin = r.dot(v);
            if (pin > 0.5 && pin < 2.0) v /= pin;
            vertices.col(i) = v;
        }
        try {
            return SimplexChart::from_vertices(vertices);
        } catch (const singular_chart_error&) {
            return std::nullopt;
        }
    };

    std::optional<SimplexChart> chart;
    for (int attempt = 0; attempt < 200; ++attempt) {
        chart = build(radius);
        if (chart && detail::raw_g_violation(chart->q(), ys) <= 0.0) break;
        chart.reset();
        radius *= 1.5;
    }
    if (!chart) throw degenerate_batch_error("init_from_batch: could not enclose the batch");
    chart = build(radius * 1.05);
    if (!chart) throw degenerate_batch_error("init_from_batch: could not enclose the batch");

    return solve(ys, *chart, cfg).chart;
}

}  // namespace ossmf
