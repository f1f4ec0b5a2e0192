#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ossmf/errors.hpp"
#include "ossmf/geometry.hpp"

namespace ossmf {

/// Orthonormal basis of the K-dimensional signal subspace plus the affine
/// normalizer used to pin the sum-to-one constraint in reduced coordinates.
///
/// The normalizer r is the least-squares hull functional of the fit window:
/// the minimizer of sum_j (r' u' y_j - 1)^2 over the batch. Reduced
/// coordinates are the projective normalization z / (r' z) with z = u' y, so
/// for noiseless model data every reduced observation lies exactly on the
/// hyperplane {w : r' w = 1} and its barycentric coordinates under the true
/// reduced chart reproduce the model coefficients. Incremental updates only
/// track u; refit_normalizer refreshes r once the basis settles.
class AffineBasis {
public:
    AffineBasis(Matrix u, Vector normalizer, long count)
        : u_(std::move(u)), normalizer_(std::move(normalizer)), count_(count) {
        if (u_.cols() > u_.rows())
            throw std::invalid_argument("AffineBasis: k must not exceed l");
        if (normalizer_.size() != u_.cols())
            throw std::invalid_argument("AffineBasis: normalizer size mismatch");
    }

    const Matrix& u() const noexcept { return u_; }
    const Vector& normalizer() const noexcept { return normalizer_; }
    int l() const noexcept { return static_cast<int>(u_.rows()); }
    int k() const noexcept { return static_cast<int>(u_.cols()); }
    long count() const noexcept { return count_; }

    AffineBasis with_count(long count) const { return AffineBasis(u_, normalizer_, count); }

private:
    Matrix u_;
    Vector normalizer_;
    long count_;
};

/// Fits the top-k left singular subspace of the raw observation matrix
/// (columns are observations) and derives the affine normalizer from the
/// same batch.
inline AffineBasis fit_batch(const Matrix& ys_raw, int k) {
    if (k <= 0) throw std::invalid_argument("fit_batch: k must be positive");
    if (ys_raw.cols() < k)
        throw degenerate_batch_error("fit_batch: fewer observations than k");
    if (k > ys_raw.rows())
        throw std::invalid_argument("fit_batch: k exceeds ambient dimension");

    Eigen::BDCSVD<Matrix> svd(ys_raw, Eigen::ComputeThinU);
    const auto& sigma = svd.singularValues();
    if (sigma[0] <= 0.0 || sigma[k - 1] <= sigma[0] * 1e-12)
        throw degenerate_batch_error("fit_batch: batch rank below k");

    Matrix u = svd.matrixU().leftCols(k);
    Vector r = hull_functional(u.transpose() * ys_raw);
    return AffineBasis(std::move(u), std::move(r), ys_raw.cols());
}

/// Oja-style rank-one subspace update with re-orthonormalization by thin QR.
/// Learning rate 1/count; zero observations leave the basis untouched but
/// still advance the count.
inline AffineBasis update(const AffineBasis& basis, const Vector& y_raw) {
    if (y_raw.size() != basis.l())
        throw std::invalid_argument("update: dimension mismatch");
    const long count = basis.count() + 1;
    const double norm = y_raw.norm();
    if (norm == 0.0 || !std::isfinite(norm)) return basis.with_count(count);

    const double rate = 1.0 / static_cast<double>(count);
    Matrix w = basis.u() + rate * y_raw * (y_raw.transpose() * basis.u());
    Eigen::HouseholderQR<Matrix> qr(w);
    Matrix q = qr.householderQ() * Matrix::Identity(basis.l(), basis.k());
    // QR leaves column signs arbitrary; align with the previous basis.
    for (int j = 0; j < basis.k(); ++j)
        if (q.col(j).dot(basis.u().col(j)) < 0.0) q.col(j) = -q.col(j);
    return AffineBasis(std::move(q), basis.normalizer(), count);
}

/// Recomputes the affine normalizer under the current basis from a raw
/// observation window. Used when the engine freezes the subspace.
inline AffineBasis refit_normalizer(const AffineBasis& basis, const Matrix& raw_window) {
    if (raw_window.rows() != basis.l())
        throw std::invalid_argument("refit_normalizer: dimension mismatch");
    Vector r = hull_functional(basis.u().transpose() * raw_window);
    return AffineBasis(basis.u(), std::move(r), basis.count());
}

/// Projects a raw observation to normalized reduced coordinates
/// (u' y) / (r' u' y). Scale-invariant in y.
inline Vector project(const AffineBasis& basis, const Vector& y_raw) {
    if (y_raw.size() != basis.l())
        throw std::invalid_argument("project: dimension mismatch");
    Vector z = basis.u().transpose() * y_raw;
    const double den = basis.normalizer().dot(z);
    if (std::abs(den) < 1e-12)
        throw near_orthogonal_error("project: observation nearly orthogonal to the hull normalizer");
    return z / den;
}

/// Column-wise project().
inline Matrix project_columns(const AffineBasis& basis, const Matrix& ys_raw) {
    Matrix out(basis.k(), ys_raw.cols());
    for (Eigen::Index j = 0; j < ys_raw.cols(); ++j)
        out.col(j) = project(basis, ys_raw.col(j));
    return out;
}

/// Lifts reduced vertex columns back to ambient coordinates. Estimated
/// vertices live on the data hull where the projective normalization is the
/// identity, so the lift is the plain basis map.
inline Matrix lift(const AffineBasis& basis, const Matrix& s_reduced) {
    if (s_reduced.rows() != basis.k())
        throw std::invalid_argument("lift: dimension mismatch");
    return basis.u() * s_reduced;
}

}  // namespace ossmf
