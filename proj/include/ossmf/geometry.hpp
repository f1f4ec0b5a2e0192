#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ossmf/errors.hpp"

namespace ossmf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline double log_abs_det_from_lu(const Eigen::PartialPivLU<Matrix>& lu) {
    double acc = 0.0;
    const auto diag = lu.matrixLU().diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
        const double d = std::abs(diag[i]);
        if (d == 0.0 || !std::isfinite(d)) return -std::numeric_limits<double>::infinity();
        acc += std::log(d);
    }
    return acc;
}

inline double one_norm(const Matrix& m) {
    return m.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace detail

/// Minimum-norm least-squares solution r of z_j' r = 1 over the columns of z.
/// For points lying exactly on a hyperplane not through the origin this
/// recovers the functional describing that hyperplane.
inline Vector hull_functional(const Matrix& z) {
    Eigen::BDCSVD<Matrix> svd(z.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector r = svd.solve(Vector::Ones(z.cols()));
    if (!r.allFinite())
        throw degenerate_batch_error("hull functional: degenerate point set");
    return r;
}

/// Invertible K x K transform Q mapping reduced observations to barycentric
/// coordinates, together with its cached inverse S = Q^{-1} (columns are the
/// simplex vertices) and log|det Q|. Immutable once built; construction
/// rejects matrices with reciprocal condition number below min_rcond.
class SimplexChart {
public:
    static constexpr double min_rcond = 1e-12;

    static SimplexChart from_q(const Matrix& q) {
        check_square(q, "chart matrix q");
        Eigen::PartialPivLU<Matrix> lu(q);
        const double log_det = detail::log_abs_det_from_lu(lu);
        Matrix s = invert(q, lu, "q");
        return SimplexChart(q, std::move(s), log_det);
    }

    /// Builds the chart from the vertex matrix (columns are vertices).
    static SimplexChart from_vertices(const Matrix& s) {
        check_square(s, "vertex matrix s");
        Eigen::PartialPivLU<Matrix> lu(s);
        const double log_det_s = detail::log_abs_det_from_lu(lu);
        Matrix q = invert(s, lu, "s");
        return SimplexChart(std::move(q), s, -log_det_s);
    }

    const Matrix& q() const noexcept { return q_; }
    const Matrix& s() const noexcept { return s_; }
    double log_abs_det_q() const noexcept { return log_abs_det_q_; }
    int k() const noexcept { return static_cast<int>(q_.rows()); }

private:
    SimplexChart(Matrix q, Matrix s, double log_abs_det_q)
        : q_(std::move(q)), s_(std::move(s)), log_abs_det_q_(log_abs_det_q) {}

    static void check_square(const Matrix& m, const char* name) {
        if (m.rows() == 0 || m.rows() != m.cols())
            throw std::invalid_argument(std::string(name) + " must be square and nonempty");
        if (!m.allFinite())
            throw std::invalid_argument(std::string(name) + " has non-finite entries");
    }

    static Matrix invert(const Matrix& m, const Eigen::PartialPivLU<Matrix>& lu,
                         const char* name) {
        if (!std::isfinite(detail::log_abs_det_from_lu(lu)))
            throw singular_chart_error(std::string("singular ") + name, 0.0);
        Matrix inv = lu.inverse();
        // One Newton refinement step keeps the cached inverse coherent with m.
        inv = inv * (2.0 * Matrix::Identity(m.rows(), m.cols()) - m * inv);
        const double rcond = 1.0 / (detail::one_norm(m) * detail::one_norm(inv));
        if (!std::isfinite(rcond) || rcond < min_rcond) {
            std::ostringstream msg;
            msg << "ill-conditioned " << name << " (rcond estimate " << rcond << ")";
            throw singular_chart_error(msg.str(), rcond);
        }
        return inv;
    }

    Matrix q_;
    Matrix s_;
    double log_abs_det_q_;
};

/// Slack parameters of the robust simplex and facet sets plus the redundancy
/// radius. Defaults follow the reference experimental setting.
struct ToleranceConfig {
    double eps1 = 1e-4;  ///< nonnegativity slack
    double eps2 = 1e-4;  ///< sum-to-one slack
    double eta = 0.03;   ///< facet-proximity threshold
    double d = 0.7;      ///< redundancy radius

    void validate() const {
        if (!(std::isfinite(eps1) && eps1 >= 0.0))
            throw std::invalid_argument("eps1 must be finite and nonnegative");
        if (!(std::isfinite(eps2) && eps2 >= 0.0))
            throw std::invalid_argument("eps2 must be finite and nonnegative");
        if (!(std::isfinite(eta) && eta >= 0.0 && eta <= 1.0))
            throw std::invalid_argument("eta must lie in [0, 1]");
        if (!(std::isfinite(d) && d >= 0.0 && d <= 1.0))
            throw std::invalid_argument("d must lie in [0, 1]");
    }
};

/// Returns the barycentric coordinates c = Q y.
inline Vector barycentric(const SimplexChart& chart, const Vector& y) {
    if (y.size() != chart.k())
        throw std::invalid_argument("barycentric: dimension mismatch");
    return chart.q() * y;
}

/// g(v) = min_i v_i; nonnegativity margin of a coordinate vector.
inline double g_min(const Vector& c) {
    if (c.size() == 0) throw std::invalid_argument("g_min: empty vector");
    return c.minCoeff();
}

/// h(v) = 1 - sum_i v_i; sum-to-one gap of a coordinate vector.
inline double h_gap(const Vector& c) { return 1.0 - c.sum(); }

/// f(v) = argmin_i v_i with ties broken by the lowest index.
inline int facet_of(const Vector& c) {
    if (c.size() == 0) throw std::invalid_argument("facet_of: empty vector");
    int best = 0;
    for (int i = 1; i < c.size(); ++i)
        if (c[i] < c[best]) best = i;
    return best;
}

/// Membership in the robust simplex: g(Qy) >= -eps1 and |h(Qy)| <= eps2,
/// boundaries inclusive.
inline bool in_robust_simplex(const SimplexChart& chart, const Vector& y,
                              const ToleranceConfig& tol) {
    const Vector c = barycentric(chart, y);
    return g_min(c) >= -tol.eps1 && std::abs(h_gap(c)) <= tol.eps2;
}

/// Facet proximity: g(Qy) <= eta. Callers must have established robust
/// membership first; this only checks the margin.
inline bool near_facet(const SimplexChart& chart, const Vector& y,
                       const ToleranceConfig& tol) {
    return g_min(barycentric(chart, y)) <= tol.eta;
}

/// Observation stored in the relevant set together with the labels computed
/// under the chart current at labeling time.
struct LabeledObservation {
    Vector y;                         ///< reduced coordinates
    Vector coeffs;                    ///< Q y under the labeling chart
    std::optional<int> facet_index;   ///< f(Qy) when on/near a facet
    std::int64_t origin_index = -1;   ///< position in the stream
};

/// Labels y under chart: caches coefficients and, when the observation sits
/// in the robust facet set, its facet index.
inline LabeledObservation label_observation(const SimplexChart& chart, const Vector& y,
                                            std::int64_t origin_index,
                                            const ToleranceConfig& tol) {
    LabeledObservation obs;
    obs.y = y;
    obs.coeffs = barycentric(chart, y);
    obs.origin_index = origin_index;
    const double g = g_min(obs.coeffs);
    const bool inside = g >= -tol.eps1 && std::abs(h_gap(obs.coeffs)) <= tol.eps2;
    if (inside && g <= tol.eta) obs.facet_index = facet_of(obs.coeffs);
    return obs;
}

/// Ordered collection of retained observations V_t. Origin indices are unique.
class RelevantSet {
public:
    RelevantSet() = default;

    void add(LabeledObservation obs) {
        for (const auto& m : members_)
            if (m.origin_index == obs.origin_index)
                throw std::invalid_argument("RelevantSet: duplicate origin index");
        members_.push_back(std::move(obs));
    }

    const std::vector<LabeledObservation>& members() const noexcept { return members_; }
    std::size_t size() const noexcept { return members_.size(); }
    bool empty() const noexcept { return members_.empty(); }
    void clear() noexcept { members_.clear(); }

    auto begin() const noexcept { return members_.begin(); }
    auto end() const noexcept { return members_.end(); }

private:
    std::vector<LabeledObservation> members_;
};

/// Members of v on/near the same facet as y under chart (the robust same-facet
/// set). Membership is recomputed from the chart, not read from stale labels.
inline std::vector<LabeledObservation> same_facet_members(const SimplexChart& chart,
                                                          const Vector& y,
                                                          const RelevantSet& v,
                                                          const ToleranceConfig& tol) {
    const int target = facet_of(barycentric(chart, y));
    std::vector<LabeledObservation> out;
    for (const auto& m : v) {
        const Vector c = barycentric(chart, m.y);
        const double g = g_min(c);
        const bool inside = g >= -tol.eps1 && std::abs(h_gap(c)) <= tol.eps2;
        if (inside && g <= tol.eta && facet_of(c) == target) out.push_back(m);
    }
    return out;
}

/// Proximity test: y is redundant when some neighbor lies within transformed
/// distance d, i.e. ||Q (y - y_n)||_2 < d. Empty neighbor sets are never
/// redundant.
inline bool is_redundant(const SimplexChart& chart, const Vector& y,
                         const std::vector<LabeledObservation>& neighbors,
                         const ToleranceConfig& tol) {
    for (const auto& n : neighbors) {
        if (n.y.size() != y.size())
            throw std::invalid_argument("is_redundant: dimension mismatch");
        if ((chart.q() * (y - n.y)).norm() < tol.d) return true;
    }
    return false;
}

/// Rebuilds a chart from a vertex matrix, refreshing the inverse and cached
/// log-determinant together.
inline SimplexChart rebuild_chart(const Matrix& s) { return SimplexChart::from_vertices(s); }

}  // namespace ossmf
