#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ossmf {

/// Numerical failure with a short machine-readable code. The CLI maps these
/// to exit status 3 (or 2 for input infeasibility) and prints a stable
/// "error[<code>]:" prefix.
class numerical_error : public std::runtime_error {
public:
    numerical_error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Chart construction rejected a (near-)singular matrix. Carries the
/// reciprocal condition estimate that triggered the rejection.
class singular_chart_error : public numerical_error {
public:
    singular_chart_error(const std::string& what, double rcond)
        : numerical_error("singular-chart", what), rcond_(rcond) {}

    double rcond() const noexcept { return rcond_; }

private:
    double rcond_;
};

/// Batch does not affinely span the requested dimension.
class degenerate_batch_error : public numerical_error {
public:
    explicit degenerate_batch_error(const std::string& what)
        : numerical_error("degenerate-batch", what) {}
};

/// Purity bound leaves (almost) no feasible coefficient columns.
class infeasible_purity_error : public numerical_error {
public:
    explicit infeasible_purity_error(const std::string& what)
        : numerical_error("infeasible-purity", what) {}
};

/// Projective normalization denominator vanished for an observation.
class near_orthogonal_error : public numerical_error {
public:
    explicit near_orthogonal_error(const std::string& what)
        : numerical_error("near-orthogonal", what) {}
};

/// Vertex matrix passed to the coefficient solver is rank deficient.
class rank_deficient_error : public numerical_error {
public:
    explicit rank_deficient_error(const std::string& what)
        : numerical_error("rank-deficient", what) {}
};

}  // namespace ossmf
