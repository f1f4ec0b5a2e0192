#pragma once

// Online state machine: one step() call per incoming observation. Inside the
// robust simplex nothing changes except possibly the relevant set (facet
// proximity + redundancy test); outside it the solver re-runs on the retained
// observations plus the newcomer and the retained set is refiltered under the
// new chart.

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>

#include "ossmf/geometry.hpp"
#include "ossmf/mvcu.hpp"

namespace ossmf {

struct EngineStats {
    std::int64_t updates_triggered = 0;
    std::int64_t observations_retained = 0;
    std::int64_t solver_iterations = 0;
};

struct EngineState {
    SimplexChart chart;
    RelevantSet relevant;
    ToleranceConfig tol;
    MvcuConfig mvcu_cfg;
    std::int64_t t = 0;
    EngineStats stats;
};

/// Per-observation decision record.
struct StepReport {
    bool updated = false;       ///< the solver ran
    bool retained = false;      ///< the observation entered the relevant set
    int pruned_count = 0;       ///< previously retained members dropped
    std::optional<MvcuResult> solver;
    double elapsed_seconds = 0.0;
};

namespace detail {

/// Retention predicate of the post-update filter: outside the robust simplex
/// or on/near a facet.
inline bool relevant_after_update(const LabeledObservation& obs, const ToleranceConfig& tol) {
    const double g = g_min(obs.coeffs);
    const bool inside = g >= -tol.eps1 && std::abs(h_gap(obs.coeffs)) <= tol.eps2;
    return !inside || g <= tol.eta;
}

inline Matrix gather_columns(const RelevantSet& v, const Vector& extra) {
    Matrix out(extra.size(), static_cast<Eigen::Index>(v.size()) + 1);
    Eigen::Index j = 0;
    for (const auto& m : v) out.col(j++) = m.y;
    out.col(j) = extra;
    return out;
}

}  // namespace detail

/// Bootstraps the engine from an initial batch (columns are reduced
/// observations): enclosing chart, one refinement solve, then the relevant
/// set filtered by the post-update predicate.
inline EngineState new_engine(const Matrix& init_batch, const ToleranceConfig& tol,
                              const MvcuConfig& mvcu_cfg) {
    tol.validate();
    mvcu_cfg.validate();
    SimplexChart chart = init_from_batch(init_batch, mvcu_cfg);
    MvcuResult refined = solve(init_batch, chart, mvcu_cfg);

    EngineState state{std::move(refined.chart), RelevantSet{}, tol, mvcu_cfg,
                      init_batch.cols(), EngineStats{}};
    for (Eigen::Index j = 0; j < init_batch.cols(); ++j) {
        LabeledObservation obs = label_observation(state.chart, init_batch.col(j), j, tol);
        if (detail::relevant_after_update(obs, tol)) state.relevant.add(std::move(obs));
    }
    return state;
}

/// Advances the engine by one observation.
inline StepReport step(EngineState& state, const Vector& y_t) {
    const auto start = std::chrono::steady_clock::now();
    if (y_t.size() != state.chart.k())
        throw std::invalid_argument("step: dimension mismatch");

    const std::int64_t origin = state.t;
    state.t += 1;

    StepReport report;
    if (!in_robust_simplex(state.chart, y_t, state.tol)) {
        // Constraint violated: re-solve on the retained observations plus y_t.
        report.updated = true;
        const Matrix ys = detail::gather_columns(state.relevant, y_t);
        MvcuResult res = solve(ys, state.chart, state.mvcu_cfg);
        state.stats.updates_triggered += 1;
        state.stats.solver_iterations += res.iters;

        if (res.converged) {
            state.chart = res.chart;
            RelevantSet next;
            int kept_prev = 0;
            for (const auto& m : state.relevant) {
                LabeledObservation relabeled =
                    label_observation(state.chart, m.y, m.origin_index, state.tol);
                if (detail::relevant_after_update(relabeled, state.tol)) {
                    next.add(std::move(relabeled));
                    ++kept_prev;
                }
            }
            LabeledObservation fresh = label_observation(state.chart, y_t, origin, state.tol);
            if (detail::relevant_after_update(fresh, state.tol)) {
                next.add(std::move(fresh));
                report.retained = true;
            }
            report.pruned_count = static_cast<int>(state.relevant.size()) - kept_prev;
            state.relevant = std::move(next);
        } else {
            // Solver failure: keep the previous chart and force-retain y_t so
            // the next update sees it again.
            state.relevant.add(label_observation(state.chart, y_t, origin, state.tol));
            report.retained = true;
        }
        report.solver = std::move(res);
    } else if (near_facet(state.chart, y_t, state.tol)) {
        const auto neighbors = same_facet_members(state.chart, y_t, state.relevant, state.tol);
        if (!is_redundant(state.chart, y_t, neighbors, state.tol)) {
            state.relevant.add(label_observation(state.chart, y_t, origin, state.tol));
            report.retained = true;
        }
    }

    if (report.retained) state.stats.observations_retained += 1;
    report.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

/// Current vertex estimate (columns of S = Q^{-1} in reduced coordinates).
inline Matrix estimate(const EngineState& state) { return state.chart.s(); }

template <typename Sink>
concept StreamSink = requires(Sink sink, const EngineState& state, const StepReport& report) {
    sink.on_step(state, report);
    sink.on_checkpoint(state);
};

/// Folds step() over the columns of ys, forwarding every report to the sink
/// and announcing checkpoints every checkpoint_every steps (0 disables them).
template <typename Sink>
    requires StreamSink<Sink>
inline EngineState run_stream(EngineState state, const Matrix& ys, int checkpoint_every,
                              Sink&& sink) {
    for (Eigen::Index j = 0; j < ys.cols(); ++j) {
        const StepReport report = step(state, ys.col(j));
        sink.on_step(state, report);
        if (checkpoint_every > 0 && (j + 1) % checkpoint_every == 0) sink.on_checkpoint(state);
    }
    return state;
}

// ---------------------------------------------------------------------------
// Naive baseline: identical gating, but triggered updates solve on every
// observation seen so far instead of the retained subset.

struct NaiveState {
    SimplexChart chart;
    Matrix history;  ///< K x capacity; first `seen` columns are valid
    Eigen::Index seen = 0;
    ToleranceConfig tol;
    MvcuConfig mvcu_cfg;
    std::int64_t t = 0;
    EngineStats stats;
};

inline NaiveState new_naive(const Matrix& init_batch, const ToleranceConfig& tol,
                            const MvcuConfig& mvcu_cfg) {
    tol.validate();
    mvcu_cfg.validate();
    SimplexChart chart = init_from_batch(init_batch, mvcu_cfg);
    MvcuResult refined = solve(init_batch, chart, mvcu_cfg);
    NaiveState state{std::move(refined.chart), init_batch, init_batch.cols(),
                     tol, mvcu_cfg, init_batch.cols(), EngineStats{}};
    return state;
}

inline StepReport naive_step(NaiveState& state, const Vector& y_t) {
    const auto start = std::chrono::steady_clock::now();
    if (y_t.size() != state.chart.k())
        throw std::invalid_argument("naive_step: dimension mismatch");

    if (state.seen == state.history.cols()) {
        Matrix grown(state.history.rows(), std::max<Eigen::Index>(2 * state.history.cols(), 8));
        grown.leftCols(state.seen) = state.history.leftCols(state.seen);
        state.history = std::move(grown);
    }
    state.history.col(state.seen) = y_t;
    state.seen += 1;
    state.t += 1;

    StepReport report;
    report.retained = true;  // the naive baseline keeps everything
    if (!in_robust_simplex(state.chart, y_t, state.tol)) {
        report.updated = true;
        MvcuResult res = solve(state.history.leftCols(state.seen), state.chart, state.mvcu_cfg);
        state.stats.updates_triggered += 1;
        state.stats.solver_iterations += res.iters;
        if (res.converged) state.chart = res.chart;
        report.solver = std::move(res);
    }
    state.stats.observations_retained += 1;
    report.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace ossmf
