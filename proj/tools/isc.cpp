// Command-line driver: simulate | ensemble | sweep | viability.
//
// Exit codes: 0 ok, 1 negative viability verdict, 2 configuration error,
// 3 numerical (integration) error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "isc/isc.hpp"

namespace fs = std::filesystem;
using namespace isc;

namespace {

constexpr const char* kVersion = "1.0.0";

struct CommonArgs {
    std::string preset;
    std::string config;
    std::vector<std::string> sets;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::string controller;
    std::optional<long long> n;
    std::optional<double> t_final_min;
    std::optional<double> rho0;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool ensemble_flags) {
    cmd->add_option("--preset", a.preset, "Base preset (mnpass_static, mnpass_dynamic)");
    cmd->add_option("--config", a.config, "JSON config layered over the preset");
    cmd->add_option("--set", a.sets, "Override, e.g. gains.k=0.5 (repeatable)")->take_all();
    cmd->add_option("--out", a.out, "Output directory");
    cmd->add_option("--seed", a.seed, "RNG seed for sampled initial conditions");
    cmd->add_option("--threads", a.threads, "Worker threads (0 = all cores)");
    if (ensemble_flags) {
        cmd->add_option("--controller", a.controller, "gisc, hmisc or fxisc");
        cmd->add_option("--n", a.n, "Number of trajectories");
        cmd->add_option("--t-final", a.t_final_min, "Horizon in minutes");
    }
}

RunConfig resolve(const CommonArgs& a) {
    auto sets = a.sets;
    if (!a.controller.empty()) sets.push_back("controller=\"" + a.controller + "\"");
    if (a.seed) sets.push_back("experiment.seed=" + std::to_string(*a.seed));
    if (a.n) sets.push_back("experiment.n_traj=" + std::to_string(*a.n));
    if (a.t_final_min) sets.push_back("experiment.t_final_min=" + json(*a.t_final_min).dump());
    return resolve_config(a.preset, a.config, sets);
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream os(p);
    os << j.dump(2) << '\n';
    if (!os) throw std::runtime_error("cannot write " + p.string());
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    return os;
}

/// config.json and manifest.json go out before any computation starts.
void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::string>& artifacts) {
    fs::create_directories(dir);
    const json resolved = to_json(cfg);
    write_json(dir / "config.json", resolved);
    json m;
    m["tool"] = "isc";
    m["version"] = kVersion;
    m["command"] = command;
    m["config_hash"] = config_hash(resolved);
    m["config"] = resolved;
    m["artifacts"] = artifacts;
    write_json(dir / "manifest.json", m);
}

void write_trace(const fs::path& p, const ClosedLoop& loop, const HybridTrace& tr) {
    auto os = open_out(p);
    write_closed_loop_trace(os, loop, tr);
}

double optimal_incentive(const RunConfig& cfg, unsigned threads) {
    auto opt = cfg.response_map_options(threads);
    opt.with_oracle = false;
    return build_response_map(cfg.plant, cfg.variant, opt).u_star;
}

int cmd_simulate(const CommonArgs& a) {
    const RunConfig cfg = resolve(a);
    const fs::path dir = a.out;
    write_manifest(dir, "simulate", cfg, {"config.json", "trace.csv", "summary.json"});

    auto ec = cfg.ensemble(a.threads);
    ec.n_traj = 1;
    if (a.rho0) ec.rho0_range = {*a.rho0, *a.rho0};
    const auto res = run_ensemble(ec);
    const auto& tr = res.traces[0];
    write_trace(dir / "trace.csv", res.loop, tr);

    json s;
    s["config_hash"] = config_hash(to_json(cfg));
    s["rho0"] = res.rho0[0];
    s["t_final_hours"] = tr.back().time.t;
    s["jumps"] = tr.jumps();
    s["final_state"] = json::object();
    for (std::size_t i = 0; i < tr.state_names.size(); ++i) s["final_state"][tr.state_names[i]] = tr.back().x[i];
    s["tmse"] = res.tmse;
    write_json(dir / "summary.json", s);
    std::cout << "simulate: rho(t_f) = " << format_number(tr.back().x[res.loop.rho_index()])
              << ", u_hat(t_f) = " << format_number(tr.back().x[res.loop.u_hat_index()]) << "\n";
    return 0;
}

int cmd_ensemble(const CommonArgs& a) {
    const RunConfig cfg = resolve(a);
    const fs::path dir = a.out;
    write_manifest(dir, "ensemble", cfg, {"config.json", "traces/", "mse.csv", "summary.json"});

    const auto ec = cfg.ensemble(a.threads);
    const auto res = run_ensemble(ec);
    fs::create_directories(dir / "traces");
    for (std::size_t i = 0; i < res.traces.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "traj_%03zu.csv", i);
        write_trace(dir / "traces" / name, res.loop, res.traces[i]);
    }
    {
        auto os = open_out(dir / "mse.csv");
        write_mse_csv(os, res);
    }
    const double u_star = optimal_incentive(cfg, a.threads);
    double max_dev = 0.0;
    std::vector<double> final_rho;
    for (const auto& tr : res.traces) {
        final_rho.push_back(tr.back().x[res.loop.rho_index()]);
        max_dev = std::max(max_dev, std::abs(final_rho.back() - cfg.rho_ref));
    }
    json s;
    s["config_hash"] = config_hash(to_json(cfg));
    s["controller"] = to_string(cfg.controller);
    s["n_traj"] = res.traces.size();
    s["rho0"] = res.rho0;
    s["final_rho"] = final_rho;
    s["max_final_deviation"] = max_dev;
    s["mse_half"] = mse(res.traces, res.loop.rho_index(), cfg.rho_ref, 0.5 * ec.t_final);
    s["mse_final"] = res.mse_curve.back();
    s["tmse"] = res.tmse;
    s["mean_final_u_hat"] = res.mean_final_u_hat();
    s["u_star"] = u_star;
    write_json(dir / "summary.json", s);
    std::cout << "ensemble " << to_string(cfg.controller) << ": tMSE = " << format_number(res.tmse)
              << ", MSE(t_f) = " << format_number(res.mse_curve.back())
              << ", mean u_hat(t_f) = " << format_number(res.mean_final_u_hat()) << " (u* = " << format_number(u_star)
              << ")\n";
    return 0;
}

int cmd_sweep(const CommonArgs& a) {
    const RunConfig cfg = resolve(a);
    const fs::path dir = a.out;
    write_manifest(dir, "sweep", cfg, {"config.json", "sweep.csv", "summary.json"});

    const auto res = gamma_sweep(cfg.ensemble(a.threads), cfg.sweep.n_values, cfg.sweep.n_seeds, cfg.sweep.spread,
                                 cfg.sweep.controllers);
    {
        auto os = open_out(dir / "sweep.csv");
        write_sweep_csv(os, res);
    }
    json s;
    s["config_hash"] = config_hash(to_json(cfg));
    s["n_values"] = res.rows.size();
    // How often each controller beats the first one listed.
    for (std::size_t c = 1; c < res.controllers.size(); ++c) {
        std::size_t wins = 0;
        for (const auto& row : res.rows) wins += row.mean_tmse[c] < row.mean_tmse[0];
        s["wins_over_" + std::string(to_string(res.controllers[0]))][to_string(res.controllers[c])] = wins;
    }
    write_json(dir / "summary.json", s);
    std::cout << "sweep: " << res.rows.size() << " values of gamma_EL written to " << (dir / "sweep.csv").string()
              << "\n";
    return 0;
}

int cmd_viability(const CommonArgs& a) {
    const RunConfig cfg = resolve(a);
    const fs::path dir = a.out;
    std::vector<std::string> artifacts{"config.json", "response_map.csv", "viability.json"};
    const bool dynamic = cfg.variant == PlantVariant::dynamic_behavior;
    if (dynamic) artifacts.emplace_back("phase_plane.csv");
    write_manifest(dir, "viability", cfg, artifacts);

    const auto map = build_response_map(cfg.plant, cfg.variant, cfg.response_map_options(a.threads));
    const auto r = viability_report(map);
    {
        auto os = open_out(dir / "response_map.csv");
        write_response_map_csv(os, map);
    }
    if (dynamic) {
        auto os = open_out(dir / "phase_plane.csv");
        const auto& an = cfg.analysis;
        write_phase_plane_csv(os, cfg.plant, an.phase_plane_u, an.q, an.rho, an.phase_plane_n);
    }

    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json j;
    j["config_hash"] = config_hash(to_json(cfg));
    j["variant"] = to_string(cfg.variant);
    j["verdicts"] = {{"A1_unique_stable_equilibrium", r.a1_unique_stable},
                     {"A2_strictly_convex", r.a2_strictly_convex},
                     {"A3_strongly_convex", r.a3_strongly_convex},
                     {"poisoned", r.poisoned},
                     {"all_positive", r.all_positive()}};
    j["u_star"] = num(r.u_star);
    j["phi_star"] = num(r.phi_star);
    j["kappa_est"] = r.kappa_est;
    j["kappa_normalized"] = r.kappa_normalized;
    j["curvature_at_optimum"] = r.curvature_at_optimum;
    j["curvature_at_optimum_normalized"] = r.curvature_at_optimum_normalized;
    j["lipschitz_est"] = r.lipschitz_est;
    j["max_oracle_gap"] = num(r.max_oracle_gap);
    j["counts"] = {{"points", r.n_points},         {"invalid", r.n_invalid},
                   {"not_unique", r.n_not_unique}, {"unstable", r.n_unstable},
                   {"basin_failures", r.n_basin_failures}, {"nonconvex", r.n_nonconvex}};
    j["valid_u_range"] = {num(r.valid_u_range.lo), num(r.valid_u_range.hi)};
    j["note"] = "eta-parameterized families of boxes are not swept; only the configured box pair is checked";
    write_json(dir / "viability.json", j);

    std::cout << "viability: A1=" << r.a1_unique_stable << " A2=" << r.a2_strictly_convex
              << " A3=" << r.a3_strongly_convex << " u*=" << format_number(r.u_star) << " (" << r.n_invalid
              << " of " << r.n_points << " grid points without a valid equilibrium)\n";
    return r.all_positive() ? 0 : 1;
}

int cmd_show_config(const CommonArgs& a) {
    std::cout << to_json(resolve(a)).dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Incentive-seeking control of highway Express lanes"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonArgs args;
    auto* sim = app.add_subcommand("simulate", "Single closed-loop trajectory");
    add_common(sim, args, true);
    sim->add_option("--rho0", args.rho0, "Initial density (default: first sampled value)");
    auto* ens = app.add_subcommand("ensemble", "Ensemble of trajectories and MSE metrics");
    add_common(ens, args, true);
    auto* swp = app.add_subcommand("sweep", "gamma_EL robustness sweep");
    add_common(swp, args, true);
    auto* via = app.add_subcommand("viability", "Response map and assumption checks");
    add_common(via, args, false);
    auto* show = app.add_subcommand("show-config", "Print the resolved configuration");
    add_common(show, args, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*sim) return cmd_simulate(args);
        if (*ens) return cmd_ensemble(args);
        if (*swp) return cmd_sweep(args);
        if (*via) return cmd_viability(args);
        if (*show) return cmd_show_config(args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const IntegrationError& e) {
        std::cerr << "integration error at (t, j) = (" << format_number(e.t()) << ", " << e.j()
                  << "): " << e.what() << '\n';
        return 3;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
