#pragma once

// Simplex-constrained least squares: for each observation column y, minimize
// ||y - S c||_2 subject to c >= 0 and 1'c = 1. ADMM splits the nonnegativity
// onto a shadow variable; the equality-constrained ridge subproblem is solved
// through one Cholesky factorization shared across iterations and columns,
// with residual balancing on the penalty parameter.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ossmf/errors.hpp"
#include "ossmf/geometry.hpp"

namespace ossmf {

struct AbundanceConfig {
    double admm_rho = 1.0;
    int max_iters = 2000;
    double primal_tol = 1e-8;
    double dual_tol = 1e-8;

    void validate() const {
        if (!(admm_rho > 0.0)) throw std::invalid_argument("admm_rho must be positive");
        if (max_iters <= 0) throw std::invalid_argument("max_iters must be positive");
        if (!(primal_tol > 0.0)) throw std::invalid_argument("primal_tol must be positive");
        if (!(dual_tol > 0.0)) throw std::invalid_argument("dual_tol must be positive");
    }
};

/// Per-column convergence diagnostics, filled on request.
struct AbundanceReport {
    std::vector<bool> converged;
    std::vector<double> primal_residual;
    std::vector<double> dual_residual;
    bool all_converged = true;
};

namespace detail {

/// Equality-constrained ridge solver with cached factorization:
/// argmin ||y - S c||^2 + rho ||c - w||^2  s.t.  1'c = 1.
class SimplexRidge {
public:
    SimplexRidge(const Matrix& gram, double rho) {
        llt_.compute(gram + rho * Matrix::Identity(gram.rows(), gram.cols()));
        ones_dir_ = llt_.solve(Vector::Ones(gram.cols()));
        ones_scale_ = ones_dir_.sum();
    }

    bool valid() const {
        return llt_.info() == Eigen::Success && std::isfinite(ones_scale_) &&
               std::abs(ones_scale_) > 1e-300;
    }

    Vector solve(const Vector& rhs) const {
        Vector free = llt_.solve(rhs);
        const double nu = (free.sum() - 1.0) / ones_scale_;
        return free - nu * ones_dir_;
    }

private:
    Eigen::LLT<Matrix> llt_;
    Vector ones_dir_;
    double ones_scale_ = 0.0;
};

}  // namespace detail

/// Solves the fully constrained problem column-wise; s has the vertex
/// estimates as columns (ambient or reduced), ys holds the observations.
/// Output columns sum to one exactly; negative entries are bounded by the
/// primal residual.
inline Matrix solve_coeffs(const Matrix& s, const Matrix& ys, const AbundanceConfig& cfg,
                           AbundanceReport* report = nullptr) {
    cfg.validate();
    if (s.rows() != ys.rows()) throw std::invalid_argument("solve_coeffs: dimension mismatch");
    if (s.cols() == 0 || ys.cols() == 0)
        throw std::invalid_argument("solve_coeffs: empty input");
    {
        Eigen::JacobiSVD<Matrix> svd(s);
        const auto& sigma = svd.singularValues();
        if (sigma[0] <= 0.0 || sigma[sigma.size() - 1] <= sigma[0] * 1e-10)
            throw rank_deficient_error("solve_coeffs: vertex matrix is rank deficient");
    }

    const Eigen::Index k = s.cols();
    const Eigen::Index n = ys.cols();
    const Matrix gram = s.transpose() * s;
    const Matrix sty = s.transpose() * ys;

    if (report) {
        report->converged.assign(n, false);
        report->primal_residual.assign(n, 0.0);
        report->dual_residual.assign(n, 0.0);
        report->all_converged = true;
    }

    const detail::SimplexRidge base_ridge(gram, cfg.admm_rho);
    if (!base_ridge.valid()) throw rank_deficient_error("solve_coeffs: factorization failed");

    Matrix out(k, n);
    std::optional<detail::SimplexRidge> local;
    for (Eigen::Index col = 0; col < n; ++col) {
        double rho = cfg.admm_rho;
        const detail::SimplexRidge* ridge = &base_ridge;

        Vector z = Vector::Constant(k, 1.0 / static_cast<double>(k));
        Vector u = Vector::Zero(k);
        Vector c = z;
        double r_norm = 0.0, s_norm = 0.0;
        bool converged = false;

        for (int it = 0; it < cfg.max_iters; ++it) {
            c = ridge->solve(sty.col(col) + rho * (z - u));
            Vector z_next = (c + u).cwiseMax(0.0);
            r_norm = (c - z_next).norm();
            s_norm = rho * (z_next - z).norm();
            z = std::move(z_next);
            u += c - z;

            if (r_norm <= cfg.primal_tol && s_norm <= cfg.dual_tol) {
                converged = true;
                break;
            }
            // Residual balancing keeps the two rates matched.
            if ((it + 1) % 50 == 0) {
                if (r_norm > 10.0 * s_norm && rho < 1e6) {
                    rho *= 2.0;
                    u *= 0.5;
                    local.emplace(gram, rho);
                    ridge = &*local;
                } else if (s_norm > 10.0 * r_norm && rho > 1e-6) {
                    rho *= 0.5;
                    u *= 2.0;
                    local.emplace(gram, rho);
                    ridge = &*local;
                }
            }
        }

        out.col(col) = c;
        if (report) {
            report->converged[col] = converged;
            report->primal_residual[col] = r_norm;
            report->dual_residual[col] = s_norm;
            if (!converged) report->all_converged = false;
        }
    }
    return out;
}

}  // namespace ossmf
