#pragma once

// Effective configuration of the CLI commands: tolerance parameters, solver
// settings, stream bookkeeping and dataset-generation knobs. Values come
// from (in increasing precedence) built-in defaults, a flat key=value config
// file, and command-line flags.

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ossmf/abundance.hpp"
#include "ossmf/geometry.hpp"
#include "ossmf/mvcu.hpp"

namespace ossmf {

struct RunConfig {
    ToleranceConfig tol;          // eps1 = eps2 = 1e-4, eta = 0.03, d = 0.7
    MvcuConfig mvcu;              // hinge weight resolved to 10*k unless set
    AbundanceConfig abundance;
    int k = 4;
    int init_batch_size = -1;     // -1: resolved to 10*k
    int burn_in = -1;             // -1: resolved to 5*k
    int checkpoint_every = 100;
    std::uint64_t seed = 1;
    bool hinge_weight_explicit = false;

    // Dataset generation (gen/bench only).
    int l = 400;
    int t = 10000;
    double purity = 0.7;
    double snr_db = 15.0;
    int gaussians_min = 3;
    int gaussians_max = 8;
    int repeats = 1;

    /// Fills the k-dependent defaults and validates everything.
    void finalize() {
        if (k < 2) throw std::invalid_argument("k must be at least 2");
        if (init_batch_size < 0) init_batch_size = 10 * k;
        if (burn_in < 0) burn_in = 5 * k;
        if (!hinge_weight_explicit) mvcu.hinge_weight = 10.0 * k;
        if (init_batch_size < k)
            throw std::invalid_argument("init-batch must be at least k");
        if (checkpoint_every < 0)
            throw std::invalid_argument("checkpoint-every must be nonnegative");
        if (repeats < 1) throw std::invalid_argument("repeats must be positive");
        tol.validate();
        mvcu.validate();
        abundance.validate();
    }

    /// Applies one key = value pair; unknown keys are rejected.
    void apply(const std::string& key, const std::string& value) {
        auto as_double = [&](const char* name) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(value, &pos);
                if (pos != value.size()) throw std::invalid_argument(name);
                return v;
            } catch (...) {
                throw std::invalid_argument(std::string("bad value for ") + name + ": " + value);
            }
        };
        auto as_int = [&](const char* name) {
            try {
                std::size_t pos = 0;
                const long v = std::stol(value, &pos);
                if (pos != value.size()) throw std::invalid_argument(name);
                return static_cast<int>(v);
            } catch (...) {
                throw std::invalid_argument(std::string("bad value for ") + name + ": " + value);
            }
        };

        if (key == "eps1") tol.eps1 = as_double("eps1");
        else if (key == "eps2") tol.eps2 = as_double("eps2");
        else if (key == "eta") tol.eta = as_double("eta");
        else if (key == "d") tol.d = as_double("d");
        else if (key == "k") k = as_int("k");
        else if (key == "init-batch") init_batch_size = as_int("init-batch");
        else if (key == "burn-in") burn_in = as_int("burn-in");
        else if (key == "checkpoint-every") checkpoint_every = as_int("checkpoint-every");
        else if (key == "seed") seed = static_cast<std::uint64_t>(std::stoull(value));
        else if (key == "hinge-weight") {
            mvcu.hinge_weight = as_double("hinge-weight");
            hinge_weight_explicit = true;
        } else if (key == "max-outer-iters") mvcu.max_outer_iters = as_int("max-outer-iters");
        else if (key == "max-inner-iters") mvcu.max_inner_iters = as_int("max-inner-iters");
        else if (key == "grad-tol") mvcu.grad_tol = as_double("grad-tol");
        else if (key == "step-shrink") mvcu.step_shrink = as_double("step-shrink");
        else if (key == "min-step") mvcu.min_step = as_double("min-step");
        else if (key == "admm-rho") abundance.admm_rho = as_double("admm-rho");
        else if (key == "admm-max-iters") abundance.max_iters = as_int("admm-max-iters");
        else if (key == "primal-tol") abundance.primal_tol = as_double("primal-tol");
        else if (key == "dual-tol") abundance.dual_tol = as_double("dual-tol");
        else if (key == "l") l = as_int("l");
        else if (key == "t") t = as_int("t");
        else if (key == "purity") purity = as_double("purity");
        else if (key == "snr-db") snr_db = as_double("snr-db");
        else if (key == "gaussians-min") gaussians_min = as_int("gaussians-min");
        else if (key == "gaussians-max") gaussians_max = as_int("gaussians-max");
        else if (key == "repeats") repeats = as_int("repeats");
        else throw std::invalid_argument("unknown config key: " + key);
    }

    void apply_file(const std::map<std::string, std::string>& kv) {
        for (const auto& [key, value] : kv) apply(key, value);
    }

    std::vector<std::pair<std::string, std::string>> to_kv() const {
        auto fmt = [](double v) {
            std::ostringstream ss;
            ss.precision(17);
            ss << v;
            return ss.str();
        };
        return {
            {"eps1", fmt(tol.eps1)},
            {"eps2", fmt(tol.eps2)},
            {"eta", fmt(tol.eta)},
            {"d", fmt(tol.d)},
            {"k", std::to_string(k)},
            {"init-batch", std::to_string(init_batch_size)},
            {"burn-in", std::to_string(burn_in)},
            {"checkpoint-every", std::to_string(checkpoint_every)},
            {"seed", std::to_string(seed)},
            {"hinge-weight", fmt(mvcu.hinge_weight)},
            {"max-outer-iters", std::to_string(mvcu.max_outer_iters)},
            {"max-inner-iters", std::to_string(mvcu.max_inner_iters)},
            {"grad-tol", fmt(mvcu.grad_tol)},
            {"step-shrink", fmt(mvcu.step_shrink)},
            {"min-step", fmt(mvcu.min_step)},
            {"admm-rho", fmt(abundance.admm_rho)},
            {"admm-max-iters", std::to_string(abundance.max_iters)},
            {"primal-tol", fmt(abundance.primal_tol)},
            {"dual-tol", fmt(abundance.dual_tol)},
            {"l", std::to_string(l)},
            {"t", std::to_string(t)},
            {"purity", fmt(purity)},
            {"snr-db", fmt(snr_db)},
            {"gaussians-min", std::to_string(gaussians_min)},
            {"gaussians-max", std::to_string(gaussians_max)},
            {"repeats", std::to_string(repeats)},
        };
    }
};

}  // namespace ossmf
