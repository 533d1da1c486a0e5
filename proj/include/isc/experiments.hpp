#pragma once

// Ensembles of closed-loop runs from sampled initial densities, the
// MSE / time-averaged MSE metrics, and the γ_EL robustness sweep.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "isc/analysis.hpp"
#include "isc/controllers.hpp"
#include "isc/hybrid.hpp"
#include "isc/parallel.hpp"

namespace isc {

struct EnsembleConfig {
    ControllerKind controller = ControllerKind::gisc;
    PlantVariant variant = PlantVariant::static_inflow;
    HighwayParams params;
    ControllerGains gains;
    DitherConfig dither;
    double rho_ref = 20.0;
    std::size_t n_traj = 60;
    Interval rho0_range{4.0, 30.0};
    double u0 = 1.0;
    double q_el0 = std::numeric_limits<double>::quiet_NaN();  // NaN → Q/3
    double t_final = 3.75;                                      // hours
    std::uint64_t seed = 1;
    double h = 5e-5;                                            // hours
    std::size_t record_stride = 20;
    double grid_step = 1.0 / 60.0;                              // one minute
    bool random_dither_phase = false;
    unsigned threads = 1;

    void validate() const {
        if (n_traj < 1) throw ConfigError("ensemble: n_traj must be >= 1");
        if (!(rho0_range.hi >= rho0_range.lo) || !(rho0_range.lo >= 0.0)) {
            throw ConfigError("ensemble: invalid initial density range");
        }
        if (!(t_final > 0.0)) throw ConfigError("ensemble: t_final must be positive");
        if (!(grid_step > 0.0)) throw ConfigError("ensemble: grid_step must be positive");
        if (!(h > 0.0)) throw ConfigError("ensemble: h must be positive");
        if (record_stride < 1) throw ConfigError("ensemble: record_stride must be >= 1");
        if (variant == PlantVariant::dynamic_behavior && std::isfinite(q_el0) &&
            !(q_el0 >= 0.0 && q_el0 <= params.demand)) {
            throw ConfigError("ensemble: q_EL(0) outside [0, Q]");
        }
    }
};

struct EnsembleResult {
    ClosedLoop loop;  // the shared closed-loop layout (indices, names)
    std::vector<double> rho0;
    std::vector<HybridTrace> traces;
    std::vector<double> grid;       // shared metric grid, hours
    std::vector<double> mse_curve;
    double tmse = 0.0;

    [[nodiscard]] double mean_final_u_hat() const {
        double acc = 0.0;
        for (const auto& tr : traces) acc += tr.back().x[loop.u_hat_index()];
        return acc / static_cast<double>(traces.size());
    }
};

/// Uniform double in [0, 1) from the top 53 bits, identical on every platform
/// (std::uniform_real_distribution is implementation-defined).
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// 0, step, 2·step, … up to t_final, with t_final always the last node.
inline std::vector<double> metric_grid(double t_final, double step) {
    std::vector<double> g;
    const auto n = static_cast<std::size_t>(std::floor(t_final / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) g.push_back(static_cast<double>(i) * step);
    if (t_final - g.back() > 1e-9 * std::max(1.0, t_final)) {
        g.push_back(t_final);
    } else {
        g.back() = t_final;
    }
    return g;
}

/// (1/N) Σ (ρ_i(t) − ρ_ref)² with ρ_i interpolated linearly between samples.
inline double mse(const std::vector<HybridTrace>& traces, std::size_t rho_index, double rho_ref, double t) {
    if (traces.empty()) throw ContractViolation("mse: no trajectories");
    double acc = 0.0;
    for (const auto& tr : traces) acc += performance_index(sample_at(tr, rho_index, t), rho_ref);
    return acc / static_cast<double>(traces.size());
}

/// (1/t_f) ∫₀^{t_f} MSE dt by the trapezoid rule over the curve's nodes.
inline double tmse(const std::vector<double>& t, const std::vector<double>& curve, double t_final) {
    if (t.size() != curve.size() || t.size() < 2) throw ContractViolation("tmse: malformed curve");
    if (!(t_final > 0.0)) throw ContractViolation("tmse: t_final must be positive");
    const double tol = 1e-9 * std::max(1.0, t_final);
    if (t.front() > tol || t.back() < t_final - tol) throw ContractViolation("tmse: curve does not span [0, t_f]");
    double area = 0.0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        const double a = t[i - 1];
        if (a >= t_final) break;
        const double b = std::min(t[i], t_final);
        double fb = curve[i];
        if (b < t[i]) fb = curve[i - 1] + (curve[i] - curve[i - 1]) * (b - a) / (t[i] - a);
        area += 0.5 * (b - a) * (curve[i - 1] + fb);
    }
    return area / t_final;
}

inline EnsembleResult run_ensemble(const EnsembleConfig& cfg) {
    cfg.validate();
    EnsembleResult res;
    res.loop = compose_closed_loop(cfg.controller, cfg.variant, cfg.gains, cfg.dither, cfg.params,
                                   ClosedLoopOptions{cfg.rho_ref, {}});
    const auto& loop = res.loop;

    // All randomness is drawn up front, in trajectory order.
    std::mt19937_64 gen(cfg.seed);
    res.rho0.resize(cfg.n_traj);
    for (auto& r : res.rho0) r = cfg.rho0_range.lo + uniform01(gen) * cfg.rho0_range.width();
    std::vector<double> phase(cfg.n_traj, 0.0);
    if (cfg.random_dither_phase) {
        for (auto& a : phase) a = 2.0 * std::numbers::pi * uniform01(gen);
    }

    const double q0 = std::isfinite(cfg.q_el0) ? cfg.q_el0 : cfg.params.demand / 3.0;
    const IntegratorConfig icfg{cfg.h, cfg.t_final, 1'000'000'000, cfg.record_stride};
    res.traces.resize(cfg.n_traj);
    parallel_for(cfg.n_traj, cfg.threads, [&](std::size_t i) {
        State x0 = loop.initial_state(res.rho0[i], cfg.u0, q0);
        x0[loop.mu_index()] = std::cos(phase[i]);
        x0[loop.mu_index() + 1] = std::sin(phase[i]);
        try {
            res.traces[i] = simulate(loop.system, x0, icfg);
        } catch (const IntegrationError& e) {
            throw IntegrationError("trajectory " + std::to_string(i) + ": " + e.what(), e.component(), e.t(), e.j());
        }
        if (res.traces[i].terminal_reason != TerminalReason::horizon) {
            throw IntegrationError("trajectory " + std::to_string(i) + " stopped early (" +
                                       to_string(res.traces[i].terminal_reason) + ")",
                                   0, res.traces[i].back().time.t, res.traces[i].back().time.j);
        }
    });

    res.grid = metric_grid(cfg.t_final, cfg.grid_step);
    res.mse_curve.reserve(res.grid.size());
    for (double t : res.grid) res.mse_curve.push_back(mse(res.traces, loop.rho_index(), cfg.rho_ref, t));
    res.tmse = tmse(res.grid, res.mse_curve, cfg.t_final);
    return res;
}

struct SweepRow {
    double gamma_el = 0.0;
    std::vector<double> mean_tmse;  // one per controller, in sweep order
};

struct SweepResult {
    std::vector<ControllerKind> controllers;
    std::vector<SweepRow> rows;
};

/// Samples n_values γ_EL uniformly within ±spread of the configured value and,
/// for each, runs an n_seeds-trajectory ensemble per controller. All
/// controllers and all γ values share the same initial densities.
inline SweepResult gamma_sweep(const EnsembleConfig& base, std::size_t n_values, std::size_t n_seeds, double spread,
                               const std::vector<ControllerKind>& controllers) {
    if (n_values < 1) throw ConfigError("sweep: n_values must be >= 1");
    if (n_seeds < 1) throw ConfigError("sweep: n_seeds must be >= 1");
    if (!(spread >= 0.0 && spread < 1.0)) throw ConfigError("sweep: spread must lie in [0, 1)");
    if (controllers.empty()) throw ConfigError("sweep: no controllers");

    SweepResult out;
    out.controllers = controllers;
    std::mt19937_64 gen(base.seed ^ 0x9e3779b97f4a7c15ULL);
    const double g0 = base.params.gamma_el;
    for (std::size_t v = 0; v < n_values; ++v) {
        SweepRow row;
        row.gamma_el = g0 * (1.0 + spread * (2.0 * uniform01(gen) - 1.0));
        out.rows.push_back(row);
    }
    // One job per (γ, controller); each writes its own cell.
    const std::size_t nc = controllers.size();
    std::vector<double> cells(n_values * nc, 0.0);
    parallel_for(n_values * nc, base.threads, [&](std::size_t job) {
        EnsembleConfig cfg = base;
        cfg.params.gamma_el = out.rows[job / nc].gamma_el;
        cfg.controller = controllers[job % nc];
        cfg.n_traj = n_seeds;
        cfg.threads = 1;
        try {
            cells[job] = run_ensemble(cfg).tmse;
        } catch (const IntegrationError& e) {
            throw IntegrationError("gamma_EL = " + format_number(cfg.params.gamma_el) + ": " + e.what(),
                                   e.component(), e.t(), e.j());
        }
    });
    for (std::size_t v = 0; v < n_values; ++v) {
        out.rows[v].mean_tmse.assign(cells.begin() + static_cast<std::ptrdiff_t>(v * nc),
                                     cells.begin() + static_cast<std::ptrdiff_t>((v + 1) * nc));
    }
    return out;
}

}  // namespace isc
