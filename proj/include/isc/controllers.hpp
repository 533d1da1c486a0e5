#pragma once

// Incentive-seeking controllers and their closed-loop composition with the
// highway plant.
//
//   GISC   x = (û, μ)          gradient flow emulation
//   HMISC  x = (û, p, τ, μ)    momentum with timer-driven resets
//   FxISC  x = (û, ξ, μ)       filtered, fixed-time (sub/super-linear) flow

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "isc/dither.hpp"
#include "isc/errors.hpp"
#include "isc/hybrid.hpp"
#include "isc/performance.hpp"
#include "isc/plant.hpp"

namespace isc {

enum class ControllerKind { gisc, hmisc, fxisc };

inline const char* to_string(ControllerKind k) {
    switch (k) {
        case ControllerKind::gisc: return "gisc";
        case ControllerKind::hmisc: return "hmisc";
        case ControllerKind::fxisc: return "fxisc";
    }
    return "?";
}

inline ControllerKind parse_controller_kind(const std::string& s) {
    if (s == "gisc") return ControllerKind::gisc;
    if (s == "hmisc") return ControllerKind::hmisc;
    if (s == "fxisc") return ControllerKind::fxisc;
    throw ConfigError("unknown controller '" + s + "' (valid kinds: gisc, hmisc, fxisc)");
}

struct ControllerGains {
    double k = 1.0;
    double alpha = 0.5;    // FxISC exponent
    int sigma = 0;         // HMISC reset policy: 1 keeps p, 0 restarts p to û
    double T0 = 0.1;       // HMISC timer reset value
    double T = 20.0;       // HMISC timer threshold
    double eps_f = 1.0;    // FxISC filter timescale
    double xi_floor = 1e-12;

    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError("gains: " + m); };
        if (!(k > 0.0)) fail("k must be positive");
        if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha must lie in (0, 1)");
        if (sigma != 0 && sigma != 1) fail("sigma must be 0 or 1");
        if (!(T0 > 0.0 && T0 < T)) fail("timer bounds must satisfy 0 < T0 < T");
        if (!(eps_f > 0.0)) fail("eps_f must be positive");
        if (!(xi_floor >= 0.0)) fail("xi_floor must be non-negative");
    }
};

/// Offsets of each controller sub-state inside the controller block.
struct ControllerLayout {
    ControllerKind kind = ControllerKind::gisc;
    std::size_t m = 1;

    [[nodiscard]] std::size_t u_hat() const { return 0; }
    [[nodiscard]] std::size_t p() const { return m; }
    [[nodiscard]] std::size_t tau() const { return 2 * m; }
    [[nodiscard]] std::size_t xi() const { return m; }
    [[nodiscard]] std::size_t mu() const {
        switch (kind) {
            case ControllerKind::gisc: return m;
            case ControllerKind::hmisc: return 2 * m + 1;
            case ControllerKind::fxisc: return 2 * m;
        }
        return 0;
    }
    [[nodiscard]] std::size_t dim() const { return mu() + 2 * m; }

    [[nodiscard]] std::vector<std::string> names() const {
        auto indexed = [this](const std::string& base, std::size_t i) {
            return m == 1 ? base : base + std::to_string(i + 1);
        };
        std::vector<std::string> out;
        for (std::size_t i = 0; i < m; ++i) out.push_back(indexed("u_hat", i));
        if (kind == ControllerKind::hmisc) {
            for (std::size_t i = 0; i < m; ++i) out.push_back(indexed("p", i));
            out.emplace_back("tau");
        }
        if (kind == ControllerKind::fxisc) {
            for (std::size_t i = 0; i < m; ++i) out.push_back(indexed("xi", i));
        }
        for (std::size_t i = 0; i < 2 * m; ++i) out.push_back("mu" + std::to_string(i + 1));
        return out;
    }
};

struct GiscState {
    std::vector<double> u_hat;
    std::vector<double> mu;

    [[nodiscard]] State pack() const {
        State x = u_hat;
        x.insert(x.end(), mu.begin(), mu.end());
        return x;
    }
};

struct HmiscState {
    std::vector<double> u_hat;
    std::vector<double> p;
    double tau = 0.0;
    std::vector<double> mu;

    [[nodiscard]] State pack() const {
        State x = u_hat;
        x.insert(x.end(), p.begin(), p.end());
        x.push_back(tau);
        x.insert(x.end(), mu.begin(), mu.end());
        return x;
    }
    static HmiscState unpack(std::span<const double> x, std::size_t m) {
        HmiscState s;
        s.u_hat.assign(x.begin(), x.begin() + m);
        s.p.assign(x.begin() + m, x.begin() + 2 * m);
        s.tau = x[2 * m];
        s.mu.assign(x.begin() + 2 * m + 1, x.begin() + 4 * m + 1);
        return s;
    }
};

struct FxiscState {
    std::vector<double> u_hat;
    std::vector<double> xi;
    std::vector<double> mu;

    [[nodiscard]] State pack() const {
        State x = u_hat;
        x.insert(x.end(), xi.begin(), xi.end());
        x.insert(x.end(), mu.begin(), mu.end());
        return x;
    }
};

namespace detail {
inline double demod(std::span<const double> mu, const DitherConfig& d, std::size_t i) {
    return 2.0 / d.eps_a * mu[2 * i];
}
}  // namespace detail

/// û̇ = −k φ M(μ),  μ̇ = (1/ε_p) R μ.
inline void gisc_rhs(std::span<const double> x, double phi, const ControllerGains& g, const DitherConfig& d,
                     std::span<double> dx) {
    const ControllerLayout lay{ControllerKind::gisc, d.m()};
    const auto mu = x.subspan(lay.mu(), 2 * d.m());
    for (std::size_t i = 0; i < d.m(); ++i) dx[lay.u_hat() + i] = -g.k * phi * detail::demod(mu, d, i);
    oscillator_rhs(mu, d, dx.subspan(lay.mu(), 2 * d.m()));
}

/// Flow of the hybrid momentum controller on C = {τ ∈ [T0, T]}:
/// û̇ = (2/τ)(p − û),  ṗ = −2kτ φ M(μ),  τ̇ = 1/2,  μ̇ = (1/ε_p) R μ.
inline void hmisc_flow(std::span<const double> x, double phi, const ControllerGains& g, const DitherConfig& d,
                       std::span<double> dx) {
    const ControllerLayout lay{ControllerKind::hmisc, d.m()};
    const double tau = x[lay.tau()];
    const double tol = 1e-9 * g.T;
    if (!(tau >= g.T0 - tol && tau <= g.T + tol)) {
        throw ContractViolation("hmisc_flow: tau = " + std::to_string(tau) + " outside [T0, T]");
    }
    const auto mu = x.subspan(lay.mu(), 2 * d.m());
    for (std::size_t i = 0; i < d.m(); ++i) {
        dx[lay.u_hat() + i] = 2.0 / tau * (x[lay.p() + i] - x[lay.u_hat() + i]);
        dx[lay.p() + i] = -2.0 * g.k * tau * phi * detail::demod(mu, d, i);
    }
    dx[lay.tau()] = 0.5;
    oscillator_rhs(mu, d, dx.subspan(lay.mu(), 2 * d.m()));
}

/// Jump at τ = T: p⁺ = σp + (1−σ)û, τ⁺ = T0; û and μ are kept.
inline void hmisc_jump(std::span<const double> x, const ControllerGains& g, std::size_t m, std::span<double> x_plus) {
    const ControllerLayout lay{ControllerKind::hmisc, m};
    if (std::abs(x[lay.tau()] - g.T) > 1e-9 * g.T) {
        throw ContractViolation("hmisc_jump: called with tau = " + std::to_string(x[lay.tau()]) + " != T");
    }
    std::copy(x.begin(), x.end(), x_plus.begin());
    for (std::size_t i = 0; i < m; ++i) {
        x_plus[lay.p() + i] = g.sigma * x[lay.p() + i] + (1 - g.sigma) * x[lay.u_hat() + i];
    }
    x_plus[lay.tau()] = g.T0;
}

/// û̇ = −k(ξ/|ξ|^α + ξ|ξ|^α), zero when |ξ| ≤ ξ_floor;
/// ξ̇ = (−ξ + φ M(μ))/ε_f;  μ̇ = (1/ε_p) R μ.
inline void fxisc_rhs(std::span<const double> x, double phi, const ControllerGains& g, const DitherConfig& d,
                      std::span<double> dx) {
    const ControllerLayout lay{ControllerKind::fxisc, d.m()};
    const auto mu = x.subspan(lay.mu(), 2 * d.m());
    const auto xi = x.subspan(lay.xi(), d.m());
    double norm2 = 0.0;
    for (double v : xi) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    const bool active = norm > g.xi_floor;
    const double scale = active ? std::pow(norm, -g.alpha) + std::pow(norm, g.alpha) : 0.0;
    for (std::size_t i = 0; i < d.m(); ++i) {
        dx[lay.u_hat() + i] = -g.k * scale * xi[i];
        dx[lay.xi() + i] = (-xi[i] + phi * detail::demod(mu, d, i)) / g.eps_f;
    }
    oscillator_rhs(mu, d, dx.subspan(lay.mu(), 2 * d.m()));
}

inline State gisc_rhs(const GiscState& s, double phi, const ControllerGains& g, const DitherConfig& d) {
    const State x = s.pack();
    State dx(x.size());
    gisc_rhs(x, phi, g, d, dx);
    return dx;
}

inline State hmisc_flow(const HmiscState& s, double phi, const ControllerGains& g, const DitherConfig& d) {
    const State x = s.pack();
    State dx(x.size());
    hmisc_flow(x, phi, g, d, dx);
    return dx;
}

inline HmiscState hmisc_jump(const HmiscState& s, const ControllerGains& g) {
    const State x = s.pack();
    State xp(x.size());
    hmisc_jump(x, g, s.u_hat.size(), xp);
    return HmiscState::unpack(xp, s.u_hat.size());
}

inline State fxisc_rhs(const FxiscState& s, double phi, const ControllerGains& g, const DitherConfig& d) {
    const State x = s.pack();
    State dx(x.size());
    fxisc_rhs(x, phi, g, d, dx);
    return dx;
}

/// Settling-time bound T* = π/(2kακ) of the fixed-time gradient flow on a
/// κ-strongly convex cost.
inline double fixed_time_bound(double k, double alpha, double kappa) {
    if (!(k > 0.0) || !(kappa > 0.0) || !(alpha > 0.0 && alpha < 1.0)) {
        throw ContractViolation("fixed_time_bound: requires k > 0, kappa > 0, alpha in (0, 1)");
    }
    return std::numbers::pi / (2.0 * k * alpha * kappa);
}

/// Dispatches to the flow of the given controller kind.
inline void controller_flow(ControllerKind kind, std::span<const double> x, double phi, const ControllerGains& g,
                            const DitherConfig& d, std::span<double> dx) {
    switch (kind) {
        case ControllerKind::gisc: gisc_rhs(x, phi, g, d, dx); break;
        case ControllerKind::hmisc: hmisc_flow(x, phi, g, d, dx); break;
        case ControllerKind::fxisc: fxisc_rhs(x, phi, g, d, dx); break;
    }
}

// =============================================================================
// Closed loop: plant state followed by the controller block.
// =============================================================================

struct ClosedLoopOptions {
    double rho_ref = 20.0;
    /// Optional additive measurement noise, evaluated on the full state.
    std::function<double(std::span<const double>)> measurement_noise;
};

struct ClosedLoop {
    HybridSystem system;
    ControllerKind kind = ControllerKind::gisc;
    PlantVariant variant = PlantVariant::static_inflow;
    ControllerLayout controller;
    std::size_t plant_dim = 1;
    DitherConfig dither;
    ControllerGains gains;
    HighwayParams params;
    double rho_ref = 20.0;

    [[nodiscard]] std::size_t rho_index() const { return plant_dim - 1; }
    [[nodiscard]] std::size_t q_el_index() const { return 0; }
    [[nodiscard]] std::size_t u_hat_index() const { return plant_dim + controller.u_hat(); }
    [[nodiscard]] std::size_t mu_index() const { return plant_dim + controller.mu(); }
    [[nodiscard]] std::size_t tau_index() const { return plant_dim + controller.tau(); }
    [[nodiscard]] std::size_t p_index() const { return plant_dim + controller.p(); }
    [[nodiscard]] std::size_t xi_index() const { return plant_dim + controller.xi(); }

    /// Dithered incentive applied to the plant.
    [[nodiscard]] double input(std::span<const double> x) const {
        return x[u_hat_index()] + dither.eps_a * x[mu_index()];
    }
    /// Undithered index at the current output (noise-free).
    [[nodiscard]] double cost(std::span<const double> x) const {
        return performance_index(x[rho_index()], rho_ref);
    }

    /// Plant at (rho0[, q_el0]), û = u_hat0, p = û, τ = T0, ξ = 0, μ = (1, 0).
    [[nodiscard]] State initial_state(double rho0, double u_hat0, double q_el0 = 0.0) const {
        State x(system.state_dim, 0.0);
        if (variant == PlantVariant::dynamic_behavior) x[q_el_index()] = q_el0;
        x[rho_index()] = rho0;
        x[u_hat_index()] = u_hat0;
        if (kind == ControllerKind::hmisc) {
            x[p_index()] = u_hat0;
            x[tau_index()] = gains.T0;
        }
        const auto mu = initial_dither_phase(controller.m);
        std::copy(mu.begin(), mu.end(), x.begin() + static_cast<std::ptrdiff_t>(mu_index()));
        return x;
    }
};

/// Builds the hybrid system of the feedback loop: the plant receives
/// u = û + ε_a𝔻μ and the controller receives φ(y) at the current output.
inline ClosedLoop compose_closed_loop(ControllerKind kind, PlantVariant variant, const ControllerGains& gains,
                                      const DitherConfig& dither, const HighwayParams& params,
                                      const ClosedLoopOptions& opts = {}) {
    gains.validate();
    params.validate();
    if (const auto report = validate_frequencies(dither.omega); !report.ok()) {
        throw ConfigError("dither frequencies: " + report.describe());
    }
    if (!(dither.eps_p > 0.0)) throw ConfigError("dither: eps_p must be positive");
    if (!(dither.eps_a > 0.0)) throw ConfigError("dither: eps_a must be positive");
    if (dither.m() != 1) {
        throw ConfigError("dimension mismatch: plant takes 1 incentive, dither provides " +
                          std::to_string(dither.m()));
    }

    ClosedLoop loop;
    loop.kind = kind;
    loop.variant = variant;
    loop.controller = ControllerLayout{kind, dither.m()};
    loop.plant_dim = variant == PlantVariant::static_inflow ? 1 : 2;
    loop.dither = dither;
    loop.gains = gains;
    loop.params = params;
    loop.rho_ref = opts.rho_ref;

    auto& sys = loop.system;
    sys.state_dim = loop.plant_dim + loop.controller.dim();
    sys.state_names = variant == PlantVariant::static_inflow ? std::vector<std::string>{"rho"}
                                                              : std::vector<std::string>{"q_EL", "rho"};
    for (auto& n : loop.controller.names()) sys.state_names.push_back(std::move(n));

    const std::size_t pd = loop.plant_dim;
    const std::size_t ctrl_dim = loop.controller.dim();
    const double eps_a = dither.eps_a;
    const std::size_t mu_at = loop.mu_index();
    const std::size_t u_at = loop.u_hat_index();
    const double rho_ref = opts.rho_ref;
    auto noise = opts.measurement_noise;

    sys.flow_map = [=](std::span<const double> x, std::span<double> dx) {
        const double u = x[u_at] + eps_a * x[mu_at];
        const double rho = x[pd - 1];
        if (variant == PlantVariant::static_inflow) {
            dx[0] = density_rhs(rho, u, params) / params.eps0;
        } else {
            // RK4 stages may step marginally outside the box; evaluate on it.
            const double q = std::clamp(x[0], 0.0, params.demand);
            const auto d = full_rhs(PlantState{q, rho}, u, params);
            dx[0] = d[0];
            dx[1] = d[1];
        }
        double phi = performance_index(rho, rho_ref);
        if (noise) phi += noise(x);
        controller_flow(kind, x.subspan(pd, ctrl_dim), phi, gains, dither, dx.subspan(pd, ctrl_dim));
    };

    if (kind == ControllerKind::hmisc) {
        const std::size_t tau_at = loop.tau_index();
        const double T0 = gains.T0;
        const double T = gains.T;
        const double tol = 1e-12 * T;
        sys.flow_set = [=](std::span<const double> x) { return x[tau_at] >= T0 - tol && x[tau_at] <= T + tol; };
        sys.jump_set = [=](std::span<const double> x) { return x[tau_at] >= T - tol; };
        const std::size_t m = dither.m();
        sys.jump_map = [=](std::span<const double> x, std::span<double> xp) {
            std::copy(x.begin(), x.end(), xp.begin());
            hmisc_jump(x.subspan(pd, ctrl_dim), gains, m, xp.subspan(pd, ctrl_dim));
        };
        sys.timer = TimerClamp{tau_at, 0.5, T};
    }
    if (variant == PlantVariant::dynamic_behavior) {
        sys.projections.push_back({0, 0.0, params.demand});
    }
    return loop;
}

/// Controller driven by a static map u ↦ φ̃(u) in place of the plant (the
/// plant frozen at steady state). State is the controller block alone.
inline HybridSystem compose_reduced_loop(ControllerKind kind, const ControllerGains& gains,
                                         const DitherConfig& dither, std::function<double(double)> cost_map) {
    gains.validate();
    if (dither.m() != 1) throw ConfigError("reduced loop supports a single incentive");
    const ControllerLayout lay{kind, 1};
    HybridSystem sys;
    sys.state_dim = lay.dim();
    sys.state_names = lay.names();
    const double eps_a = dither.eps_a;
    const std::size_t mu_at = lay.mu();
    sys.flow_map = [=](std::span<const double> x, std::span<double> dx) {
        const double phi = cost_map(x[0] + eps_a * x[mu_at]);
        controller_flow(kind, x, phi, gains, dither, dx);
    };
    if (kind == ControllerKind::hmisc) {
        const std::size_t tau_at = lay.tau();
        const double tol = 1e-12 * gains.T;
        sys.flow_set = [=](std::span<const double> x) {
            return x[tau_at] >= gains.T0 - tol && x[tau_at] <= gains.T + tol;
        };
        sys.jump_set = [=](std::span<const double> x) { return x[tau_at] >= gains.T - tol; };
        sys.jump_map = [=](std::span<const double> x, std::span<double> xp) { hmisc_jump(x, gains, 1, xp); };
        sys.timer = TimerClamp{tau_at, 0.5, gains.T};
    }
    return sys;
}

}  // namespace isc
