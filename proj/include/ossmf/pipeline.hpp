#pragma once

// End-to-end stream driver over raw L-dimensional observations: subspace fit
// on the initial batch, projection to normalized reduced coordinates, engine
// bootstrap, then one step per remaining observation in arrival order.
//
// Subspace freeze policy: the basis stops adapting once it has absorbed
// burn_in observations. With the default sizes (init batch 10K, burn-in 5K)
// the batch fit already covers the burn-in, so the basis is frozen before
// streaming starts. When burn_in exceeds the initial batch, the basis keeps
// taking rank-one updates per arrival; at the freeze point the normalizer is
// refit and the retained observations are re-projected and relabeled under
// the frozen coordinates. Metric checkpoints are driven by an optional
// evaluator callback keyed on the global observation index.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ossmf/csv.hpp"
#include "ossmf/engine.hpp"
#include "ossmf/run_config.hpp"
#include "ossmf/subspace.hpp"

namespace ossmf {

struct StreamMetrics {
    double asad_deg = 0.0;
    double rmse = 0.0;
    bool has_rmse = false;
};

/// Called at checkpoints and after the final step with the lifted vertex
/// estimate; returns metrics to append to the log row, or nothing.
using StreamEvaluator = std::function<std::optional<StreamMetrics>(
    std::int64_t t, const Matrix& lifted_vertices)>;

struct PipelineResult {
    AffineBasis basis;
    Matrix lifted_estimate;            ///< L x K
    std::vector<csv::LogRow> rows;     ///< one per streamed observation
    std::int64_t updates = 0;
    std::int64_t final_relevant = 0;
    double mean_step_seconds = 0.0;
};

namespace detail {

inline void finish_rows(PipelineResult& result) {
    double total = 0.0;
    for (const auto& row : result.rows) {
        total += row.step_seconds;
        if (row.updated) ++result.updates;
    }
    result.mean_step_seconds =
        result.rows.empty() ? 0.0 : total / static_cast<double>(result.rows.size());
}

inline AffineBasis bootstrap_basis(const Matrix& raw, int k, int init_batch) {
    return fit_batch(raw.leftCols(init_batch), k);
}

}  // namespace detail

/// Online pipeline (relevant-set engine). raw holds observations as columns.
inline PipelineResult run_online_pipeline(const Matrix& raw, const RunConfig& cfg,
                                          const StreamEvaluator& evaluator = {}) {
    const Eigen::Index total = raw.cols();
    if (total < cfg.init_batch_size)
        throw std::invalid_argument("stream shorter than the initial batch");

    AffineBasis basis = detail::bootstrap_basis(raw, cfg.k, cfg.init_batch_size);
    EngineState state =
        new_engine(project_columns(basis, raw.leftCols(cfg.init_batch_size)), cfg.tol, cfg.mvcu);

    PipelineResult result{std::move(basis), Matrix{}, {}, 0, 0, 0.0};
    bool frozen = result.basis.count() >= cfg.burn_in;

    for (Eigen::Index j = cfg.init_batch_size; j < total; ++j) {
        if (!frozen) {
            result.basis = update(result.basis, raw.col(j));
            if (result.basis.count() >= cfg.burn_in) {
                // Freeze: refit the normalizer over everything seen, then
                // re-project and relabel the retained observations.
                result.basis = refit_normalizer(result.basis, raw.leftCols(j + 1));
                RelevantSet reprojected;
                for (const auto& m : state.relevant) {
                    const Vector y = project(result.basis, raw.col(m.origin_index));
                    reprojected.add(label_observation(state.chart, y, m.origin_index, cfg.tol));
                }
                state.relevant = std::move(reprojected);
                frozen = true;
            }
        }

        const Vector y = project(result.basis, raw.col(j));
        const StepReport report = step(state, y);

        csv::LogRow row;
        row.t = state.t;
        row.updated = report.updated;
        row.retained = report.retained;
        row.relevant_count = static_cast<std::int64_t>(state.relevant.size());
        row.step_seconds = report.elapsed_seconds;

        const bool at_checkpoint =
            cfg.checkpoint_every > 0 &&
            (j - cfg.init_batch_size + 1) % cfg.checkpoint_every == 0;
        const bool last = j + 1 == total;
        if (evaluator && (at_checkpoint || last)) {
            if (auto metrics = evaluator(state.t, lift(result.basis, estimate(state)))) {
                row.asad_deg = metrics->asad_deg;
                if (metrics->has_rmse) row.rmse = metrics->rmse;
            }
        }
        result.rows.push_back(row);
    }

    result.lifted_estimate = lift(result.basis, estimate(state));
    result.final_relevant = static_cast<std::int64_t>(state.relevant.size());
    detail::finish_rows(result);
    return result;
}

/// Naive baseline pipeline: identical gating and subspace handling, but
/// updates re-solve on every observation seen so far.
inline PipelineResult run_naive_pipeline(const Matrix& raw, const RunConfig& cfg,
                                         const StreamEvaluator& evaluator = {}) {
    const Eigen::Index total = raw.cols();
    if (total < cfg.init_batch_size)
        throw std::invalid_argument("stream shorter than the initial batch");

    AffineBasis basis = detail::bootstrap_basis(raw, cfg.k, cfg.init_batch_size);
    NaiveState state =
        new_naive(project_columns(basis, raw.leftCols(cfg.init_batch_size)), cfg.tol, cfg.mvcu);

    PipelineResult result{std::move(basis), Matrix{}, {}, 0, 0, 0.0};
    bool frozen = result.basis.count() >= cfg.burn_in;

    for (Eigen::Index j = cfg.init_batch_size; j < total; ++j) {
        if (!frozen) {
            result.basis = update(result.basis, raw.col(j));
            if (result.basis.count() >= cfg.burn_in) {
                result.basis = refit_normalizer(result.basis, raw.leftCols(j + 1));
                // Re-project the full history under the frozen coordinates.
                state.history.leftCols(state.seen) =
                    project_columns(result.basis, raw.leftCols(state.seen));
                frozen = true;
            }
        }

        const Vector y = project(result.basis, raw.col(j));
        const StepReport report = naive_step(state, y);

        csv::LogRow row;
        row.t = state.t;
        row.updated = report.updated;
        row.retained = report.retained;
        row.relevant_count = state.seen;
        row.step_seconds = report.elapsed_seconds;

        const bool at_checkpoint =
            cfg.checkpoint_every > 0 &&
            (j - cfg.init_batch_size + 1) % cfg.checkpoint_every == 0;
        const bool last = j + 1 == total;
        if (evaluator && (at_checkpoint || last)) {
            if (auto metrics = evaluator(state.t, lift(result.basis, state.chart.s()))) {
                row.asad_deg = metrics->asad_deg;
                if (metrics->has_rmse) row.rmse = metrics->rmse;
            }
        }
        result.rows.push_back(row);
    }

    result.lifted_estimate = lift(result.basis, state.chart.s());
    result.final_relevant = state.seen;
    detail::finish_rows(result);
    return result;
}

}  // namespace ossmf
