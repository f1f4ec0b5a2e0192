// Command-line surface: dataset generation, online and naive stream runs,
// offline evaluation, and paired benchmarking with CSV outputs.
//
// Exit codes: 0 success, 2 bad input, 3 numerical failure. Errors print a
// single machine-parsable line "error[<code>]: <message>" on stderr.

#include <cmath>
#include <cstdint>
#include <exception>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ossmf/abundance.hpp"
#include "ossmf/csv.hpp"
#include "ossmf/datagen.hpp"
#include "ossmf/engine.hpp"
#include "ossmf/errors.hpp"
#include "ossmf/metrics.hpp"
#include "ossmf/mvcu.hpp"
#include "ossmf/pipeline.hpp"
#include "ossmf/run_config.hpp"
#include "ossmf/subspace.hpp"

namespace {

using namespace ossmf;

struct CommonFlags {
    std::string data, s_true, c_true, out, config;
    bool print_config = false;
};

struct FlagBindings {
    CLI::Option* eps1 = nullptr;
    CLI::Option* eps2 = nullptr;
    CLI::Option* eta = nullptr;
    CLI::Option* d = nullptr;
    CLI::Option* k = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* init_batch = nullptr;
    CLI::Option* burn_in = nullptr;
    CLI::Option* checkpoint_every = nullptr;
    CLI::Option* snr_db = nullptr;
    CLI::Option* purity = nullptr;
    CLI::Option* l = nullptr;
    CLI::Option* t = nullptr;
    CLI::Option* repeats = nullptr;
    double eps1_v, eps2_v, eta_v, d_v, snr_v, purity_v;
    int k_v, init_v, burn_v, every_v, l_v, t_v, repeats_v;
    std::uint64_t seed_v;
};

void add_config_flags(CLI::App* cmd, CommonFlags& files, FlagBindings& b) {
    cmd->add_option("--config", files.config, "flat key = value config file");
    cmd->add_flag("--print-config", files.print_config,
                  "print the effective configuration and exit");
    b.eps1 = cmd->add_option("--eps1", b.eps1_v, "nonnegativity slack");
    b.eps2 = cmd->add_option("--eps2", b.eps2_v, "sum-to-one slack");
    b.eta = cmd->add_option("--eta", b.eta_v, "facet-proximity threshold");
    b.d = cmd->add_option("--d", b.d_v, "redundancy radius");
    b.k = cmd->add_option("--k", b.k_v, "rank / subspace dimension");
    b.seed = cmd->add_option("--seed", b.seed_v, "RNG seed");
    b.init_batch = cmd->add_option("--init-batch", b.init_v, "initial batch size");
    b.burn_in = cmd->add_option("--burn-in", b.burn_v, "subspace burn-in count");
    b.checkpoint_every =
        cmd->add_option("--checkpoint-every", b.every_v, "steps between metric checkpoints");
    b.snr_db = cmd->add_option("--snr-db", b.snr_v, "target SNR in dB (inf disables noise)");
    b.purity = cmd->add_option("--purity", b.purity_v, "max coefficient entry");
    b.l = cmd->add_option("--l", b.l_v, "spectral length");
    b.t = cmd->add_option("--t", b.t_v, "observation count");
    b.repeats = cmd->add_option("--repeats", b.repeats_v, "benchmark repeats");
}

RunConfig resolve_config(const CommonFlags& files, const FlagBindings& b) {
    RunConfig cfg;
    if (!files.config.empty()) cfg.apply_file(csv::read_kv_file(files.config));
    if (*b.eps1) cfg.tol.eps1 = b.eps1_v;
    if (*b.eps2) cfg.tol.eps2 = b.eps2_v;
    if (*b.eta) cfg.tol.eta = b.eta_v;
    if (*b.d) cfg.tol.d = b.d_v;
    if (*b.k) cfg.k = b.k_v;
    if (*b.seed) cfg.seed = b.seed_v;
    if (*b.init_batch) cfg.init_batch_size = b.init_v;
    if (*b.burn_in) cfg.burn_in = b.burn_v;
    if (*b.checkpoint_every) cfg.checkpoint_every = b.every_v;
    if (*b.snr_db) cfg.snr_db = b.snr_v;
    if (*b.purity) cfg.purity = b.purity_v;
    if (*b.l) cfg.l = b.l_v;
    if (*b.t) cfg.t = b.t_v;
    if (*b.repeats) cfg.repeats = b.repeats_v;
    cfg.finalize();
    return cfg;
}

bool maybe_print_config(const CommonFlags& files, const RunConfig& cfg) {
    if (!files.print_config) return false;
    for (const auto& [key, value] : cfg.to_kv()) std::cout << key << " = " << value << "\n";
    return true;
}

DatasetSpec dataset_spec(const RunConfig& cfg) {
    DatasetSpec spec;
    spec.l = cfg.l;
    spec.t = cfg.t;
    spec.k = cfg.k;
    spec.purity = cfg.purity;
    spec.snr_db = cfg.snr_db;
    spec.seed = cfg.seed;
    spec.gaussians_min = cfg.gaussians_min;
    spec.gaussians_max = cfg.gaussians_max;
    return spec;
}

void require_out(const CommonFlags& files) {
    if (files.out.empty()) throw std::invalid_argument("--out is required");
}

// ---- gen ------------------------------------------------------------------

int cmd_gen(const CommonFlags& files, const RunConfig& cfg) {
    require_out(files);
    const DatasetSpec spec = dataset_spec(cfg);
    const Dataset ds = make_dataset(spec);
    // Data layout: one observation per row.
    csv::write_matrix(files.out + "_Y.csv", ds.y_noisy.transpose());
    csv::write_matrix(files.out + "_S.csv", ds.s_true);
    csv::write_matrix(files.out + "_C.csv", ds.c_true);
    csv::write_kv_file(files.out + "_spec.txt",
                       {{"l", std::to_string(spec.l)},
                        {"t", std::to_string(spec.t)},
                        {"k", std::to_string(spec.k)},
                        {"purity", std::to_string(spec.purity)},
                        {"snr-db", std::to_string(spec.snr_db)},
                        {"seed", std::to_string(spec.seed)},
                        {"gaussians-min", std::to_string(spec.gaussians_min)},
                        {"gaussians-max", std::to_string(spec.gaussians_max)}});
    std::cout << "wrote " << files.out << "_{Y,S,C}.csv (" << spec.t << " x " << spec.l
              << " observations, k = " << spec.k << ")\n";
    return 0;
}

// ---- run / naive ----------------------------------------------------------

StreamEvaluator make_evaluator(const std::optional<Matrix>& s_true,
                               const std::optional<Matrix>& c_true, const Matrix& raw,
                               const RunConfig& cfg) {
    if (!s_true) return {};
    Matrix s_ref = *s_true;
    std::optional<Matrix> c_ref = c_true;
    Matrix observations = raw;
    AbundanceConfig abundance = cfg.abundance;
    return [s_ref, c_ref, observations, abundance](
               std::int64_t, const Matrix& lifted) -> std::optional<StreamMetrics> {
        StreamMetrics metrics;
        const auto perm = match_vertices(s_ref, lifted);
        const Matrix matched = apply_matching(lifted, perm);
        metrics.asad_deg = asad(s_ref, matched);
        if (c_ref) {
            const Matrix c_est = solve_coeffs(matched, observations, abundance);
            metrics.rmse = rmse(*c_ref, c_est);
            metrics.has_rmse = true;
        }
        return metrics;
    };
}

int cmd_stream(const CommonFlags& files, const RunConfig& cfg, bool naive) {
    require_out(files);
    if (files.data.empty()) throw std::invalid_argument("--data is required");
    const Matrix raw = csv::read_matrix(files.data).transpose();  // columns = observations
    if (raw.cols() < cfg.init_batch_size)
        throw std::invalid_argument("need at least init-batch observations");

    std::optional<Matrix> s_true, c_true;
    if (!files.s_true.empty()) s_true = csv::read_matrix(files.s_true);
    if (!files.c_true.empty()) c_true = csv::read_matrix(files.c_true);

    const StreamEvaluator evaluator = make_evaluator(s_true, c_true, raw, cfg);
    const PipelineResult result = naive ? run_naive_pipeline(raw, cfg, evaluator)
                                        : run_online_pipeline(raw, cfg, evaluator);

    csv::LogWriter log(files.out + "_log.csv");
    for (const auto& row : result.rows) log.write(row);
    csv::write_matrix(files.out + "_est.csv", result.lifted_estimate);

    std::cout << (naive ? "naive" : "ossmf") << ": " << result.rows.size() << " steps, "
              << result.updates << " updates, mean step " << result.mean_step_seconds
              << " s, retained " << result.final_relevant << "\n";
    return 0;
}

// ---- eval -----------------------------------------------------------------

int cmd_eval(const CommonFlags& files, const RunConfig& cfg) {
    require_out(files);
    if (files.data.empty()) throw std::invalid_argument("--data is required");
    const Matrix raw = csv::read_matrix(files.data).transpose();

    // Offline reference: fit the subspace on everything, then one full solve.
    AffineBasis basis = fit_batch(raw, cfg.k);
    const Matrix reduced = project_columns(basis, raw);
    const SimplexChart chart =
        solve(reduced, init_from_batch(reduced, cfg.mvcu), cfg.mvcu).chart;
    const Matrix lifted = lift(basis, chart.s());
    csv::write_matrix(files.out + "_est.csv", lifted);

    if (!files.s_true.empty()) {
        const Matrix s_ref = csv::read_matrix(files.s_true);
        const auto perm = match_vertices(s_ref, lifted);
        const Matrix matched = apply_matching(lifted, perm);
        const double asad_deg = asad(s_ref, matched);
        std::optional<double> rmse_value;
        if (!files.c_true.empty()) {
            const Matrix c_ref = csv::read_matrix(files.c_true);
            rmse_value = rmse(c_ref, solve_coeffs(matched, raw, cfg.abundance));
        }
        std::ofstream metrics(files.out + "_metrics.csv");
        metrics << "asad_deg,rmse\n" << asad_deg << ",";
        if (rmse_value) metrics << *rmse_value;
        metrics << "\n";
        std::cout << "offline reference: asad " << asad_deg << " deg";
        if (rmse_value) std::cout << ", rmse " << *rmse_value;
        std::cout << "\n";
    } else {
        std::cout << "offline reference estimate written to " << files.out << "_est.csv\n";
    }
    return 0;
}

// ---- bench ----------------------------------------------------------------

struct BenchAccumulator {
    std::vector<double> step_seconds, final_asad, final_rmse;

    void add(const PipelineResult& result, const Dataset& ds, const RunConfig& cfg) {
        step_seconds.push_back(result.mean_step_seconds);
        const auto perm = match_vertices(ds.s_true, result.lifted_estimate);
        const Matrix matched = apply_matching(result.lifted_estimate, perm);
        final_asad.push_back(asad(ds.s_true, matched));
        final_rmse.push_back(rmse(ds.c_true, solve_coeffs(matched, ds.y_noisy, cfg.abundance)));
    }

    static std::pair<double, double> mean_std(const std::vector<double>& xs) {
        const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var = xs.size() > 1 ? var / (xs.size() - 1) : 0.0;
        return {mean, std::sqrt(var)};
    }
};

int cmd_bench(const CommonFlags& files, const RunConfig& cfg) {
    require_out(files);
    BenchAccumulator ossmf_acc, naive_acc;
    for (int rep = 0; rep < cfg.repeats; ++rep) {
        RunConfig rep_cfg = cfg;
        rep_cfg.seed = cfg.seed + static_cast<std::uint64_t>(rep);
        rep_cfg.checkpoint_every = 0;  // timing runs skip checkpoint metrics
        const Dataset ds = make_dataset(dataset_spec(rep_cfg));
        ossmf_acc.add(run_online_pipeline(ds.y_noisy, rep_cfg), ds, rep_cfg);
        naive_acc.add(run_naive_pipeline(ds.y_noisy, rep_cfg), ds, rep_cfg);
    }

    const auto [ossmf_time, ossmf_time_std] = BenchAccumulator::mean_std(ossmf_acc.step_seconds);
    const auto [naive_time, naive_time_std] = BenchAccumulator::mean_std(naive_acc.step_seconds);
    const double speedup = naive_time / ossmf_time;

    std::ofstream out(files.out + "_summary.csv");
    out << "method,repeats,step_seconds_mean,step_seconds_std,final_asad_deg_mean,"
           "final_asad_deg_std,final_rmse_mean,final_rmse_std,speedup\n";
    auto emit = [&](const char* name, const BenchAccumulator& acc, double time_mean,
                    double time_std) {
        const auto [asad_mean, asad_std] = BenchAccumulator::mean_std(acc.final_asad);
        const auto [rmse_mean, rmse_std] = BenchAccumulator::mean_std(acc.final_rmse);
        out << name << ',' << cfg.repeats << ',' << time_mean << ',' << time_std << ','
            << asad_mean << ',' << asad_std << ',' << rmse_mean << ',' << rmse_std << ','
            << speedup << "\n";
    };
    emit("ossmf", ossmf_acc, ossmf_time, ossmf_time_std);
    emit("naive", naive_acc, naive_time, naive_time_std);

    std::cout << "ossmf mean step " << ossmf_time << " s, naive mean step " << naive_time
              << " s, speedup " << speedup << "x\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"online simplex-structured matrix factorization toolkit"};
    app.require_subcommand(0, 1);

    CommonFlags gen_files, run_files, naive_files, eval_files, bench_files;
    FlagBindings gen_b, run_b, naive_b, eval_b, bench_b;

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen->add_option("--out", gen_files.out, "output path prefix");
    add_config_flags(gen, gen_files, gen_b);

    auto* run = app.add_subcommand("run", "stream a dataset through the online engine");
    run->add_option("--data", run_files.data, "observation CSV (one observation per row)");
    run->add_option("--s-true", run_files.s_true, "ground-truth basis CSV (L x K)");
    run->add_option("--c-true", run_files.c_true, "ground-truth coefficients CSV (K x T)");
    run->add_option("--out", run_files.out, "output path prefix");
    add_config_flags(run, run_files, run_b);

    auto* naive = app.add_subcommand("naive", "stream with full-history re-solves");
    naive->add_option("--data", naive_files.data, "observation CSV (one observation per row)");
    naive->add_option("--s-true", naive_files.s_true, "ground-truth basis CSV (L x K)");
    naive->add_option("--c-true", naive_files.c_true, "ground-truth coefficients CSV (K x T)");
    naive->add_option("--out", naive_files.out, "output path prefix");
    add_config_flags(naive, naive_files, naive_b);

    auto* eval = app.add_subcommand("eval", "offline full-data estimate and metrics");
    eval->add_option("--data", eval_files.data, "observation CSV (one observation per row)");
    eval->add_option("--s-true", eval_files.s_true, "ground-truth basis CSV (L x K)");
    eval->add_option("--c-true", eval_files.c_true, "ground-truth coefficients CSV (K x T)");
    eval->add_option("--out", eval_files.out, "output path prefix");
    add_config_flags(eval, eval_files, eval_b);

    auto* bench = app.add_subcommand("bench", "paired online/naive benchmark over seeds");
    bench->add_option("--out", bench_files.out, "output path prefix");
    add_config_flags(bench, bench_files, bench_b);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error[bad-input]: " << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) {
            const RunConfig cfg = resolve_config(gen_files, gen_b);
            if (maybe_print_config(gen_files, cfg)) return 0;
            return cmd_gen(gen_files, cfg);
        }
        if (run->parsed()) {
            const RunConfig cfg = resolve_config(run_files, run_b);
            if (maybe_print_config(run_files, cfg)) return 0;
            return cmd_stream(run_files, cfg, false);
        }
        if (naive->parsed()) {
            const RunConfig cfg = resolve_config(naive_files, naive_b);
            if (maybe_print_config(naive_files, cfg)) return 0;
            return cmd_stream(naive_files, cfg, true);
        }
        if (eval->parsed()) {
            const RunConfig cfg = resolve_config(eval_files, eval_b);
            if (maybe_print_config(eval_files, cfg)) return 0;
            return cmd_eval(eval_files, cfg);
        }
        if (bench->parsed()) {
            const RunConfig cfg = resolve_config(bench_files, bench_b);
            if (maybe_print_config(bench_files, cfg)) return 0;
            return cmd_bench(bench_files, cfg);
        }
        std::cout << app.help();
        return 0;
    } catch (const infeasible_purity_error& e) {
        std::cerr << "error[" << e.code() << "]: " << e.what() << "\n";
        return 2;
    } catch (const numerical_error& e) {
        std::cerr << "error[" << e.code() << "]: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error[bad-input]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 3;
    }
}
