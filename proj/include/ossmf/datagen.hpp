#pragma once

// Seeded synthetic data: Gaussian-bump basis spectra, purity-truncated
// uniform simplex coefficients, additive white Gaussian noise at a target
// SNR. All draws come from per-purpose substreams of the counter-based
// generator defined in rng.hpp (SplitMix64 finalizer in counter mode), so a
// fixed spec reproduces the dataset bit for bit.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "ossmf/errors.hpp"
#include "ossmf/geometry.hpp"
#include "ossmf/rng.hpp"

namespace ossmf {

namespace rng_tag {
inline constexpr std::uint64_t basis = 0x01;
inline constexpr std::uint64_t coeffs = 0x02;
inline constexpr std::uint64_t noise = 0x03;
}  // namespace rng_tag

struct DatasetSpec {
    int l = 400;            ///< spectral length
    int t = 10000;          ///< observation count
    int k = 7;              ///< rank
    double purity = 0.7;    ///< max coefficient entry, must exceed 1/k
    double snr_db = 15.0;   ///< +inf disables noise
    std::uint64_t seed = 1;
    int gaussians_min = 3;  ///< bumps per basis column, inclusive range
    int gaussians_max = 8;

    void validate() const {
        if (k < 2) throw std::invalid_argument("k must be at least 2");
        if (l < k) throw std::invalid_argument("l must be at least k");
        if (t < 1) throw std::invalid_argument("t must be at least 1");
        if (!(purity <= 1.0) || std::isnan(purity))
            throw std::invalid_argument("purity must lie in (1/k, 1]");
        if (!(purity > 1.0 / static_cast<double>(k)))
            throw infeasible_purity_error("purity must exceed 1/k");
        if (gaussians_min < 1 || gaussians_max < gaussians_min)
            throw std::invalid_argument("invalid gaussians-per-basis range");
        if (std::isnan(snr_db)) throw std::invalid_argument("snr_db must not be NaN");
    }
};

struct Dataset {
    Matrix s_true;   ///< L x K, nonnegative, columns normalized to unit max
    Matrix c_true;   ///< K x T, columns on the simplex with max entry <= purity
    Matrix y_clean;  ///< s_true * c_true
    Matrix y_noisy;
    DatasetSpec spec;
};

/// Basis columns as sums of Gaussian bumps over the index grid [0, L):
/// amplitudes in (0.2, 1], widths in (L/100, L/10], means uniform in [0, L).
inline Matrix gen_basis(const DatasetSpec& spec) {
    spec.validate();
    Matrix s = Matrix::Zero(spec.l, spec.k);
    for (int col = 0; col < spec.k; ++col) {
        CounterRng rng(spec.seed, rng_tag::basis, static_cast<std::uint64_t>(col));
        const int span = spec.gaussians_max - spec.gaussians_min + 1;
        const int bumps = spec.gaussians_min + static_cast<int>(rng.next_below(span));
        for (int b = 0; b < bumps; ++b) {
            const double amplitude = 0.2 + 0.8 * rng.next_unit_open();
            const double mean = rng.next_unit() * spec.l;
            const double width =
                spec.l / 100.0 + (spec.l / 10.0 - spec.l / 100.0) * rng.next_unit_open();
            for (int i = 0; i < spec.l; ++i) {
                const double z = (i - mean) / width;
                s(i, col) += amplitude * std::exp(-0.5 * z * z);
            }
        }
        s.col(col) /= s.col(col).maxCoeff();
    }
    return s;
}

/// Coefficient columns drawn uniformly on the simplex (flat Dirichlet via
/// normalized exponentials), rejecting columns whose max entry exceeds the
/// purity bound. Aborts when a 1e5-draw probe shows acceptance below 1e-4.
inline Matrix gen_coeffs(const DatasetSpec& spec) {
    spec.validate();
    Matrix c(spec.k, spec.t);
    std::uint64_t attempts = 0;
    std::uint64_t accepts = 0;
    constexpr std::uint64_t probe = 100000;
    Vector draw(spec.k);
    for (int col = 0; col < spec.t; ++col) {
        CounterRng rng(spec.seed, rng_tag::coeffs, static_cast<std::uint64_t>(col));
        for (;;) {
            ++attempts;
            for (int i = 0; i < spec.k; ++i) draw[i] = -std::log(rng.next_unit_open());
            draw /= draw.sum();
            if (draw.maxCoeff() <= spec.purity) {
                ++accepts;
                break;
            }
            if (attempts == probe && accepts * 10000 < attempts)
                throw infeasible_purity_error(
                    "gen_coeffs: acceptance rate below 1e-4 over a 1e5-draw probe");
        }
        c.col(col) = draw;
    }
    return c;
}

/// Adds white Gaussian noise reaching the requested SNR:
/// sigma^2 = ||y||_F^2 / (L T 10^(snr/10)). An infinite snr_db is the
/// noise-disabled sentinel.
inline Matrix add_noise(const Matrix& y_clean, double snr_db, std::uint64_t seed) {
    if (y_clean.size() == 0) throw std::invalid_argument("add_noise: empty input");
    if (std::isinf(snr_db) && snr_db > 0) return y_clean;
    if (std::isnan(snr_db)) throw std::invalid_argument("add_noise: snr_db must not be NaN");
    const double power = y_clean.squaredNorm();
    if (power == 0.0) throw std::invalid_argument("add_noise: input is identically zero");
    const double sigma = std::sqrt(
        power / (static_cast<double>(y_clean.size()) * std::pow(10.0, snr_db / 10.0)));
    CounterRng rng(seed, rng_tag::noise);
    Matrix out = y_clean;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            out(i, j) += sigma * rng.next_gaussian();
    return out;
}

inline Dataset make_dataset(const DatasetSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.spec = spec;
    ds.s_true = gen_basis(spec);
    ds.c_true = gen_coeffs(spec);
    ds.y_clean = ds.s_true * ds.c_true;
    ds.y_noisy = add_noise(ds.y_clean, spec.snr_db, spec.seed);
    return ds;
}

}  // namespace ossmf
