#pragma once

// Steady-state response map ℓ(u), reduced cost φ̃(u) = φ_ref(h(ℓ(u))), the
// optimal incentive, and numerical checks of the plant/cost assumptions.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "isc/controllers.hpp"
#include "isc/hybrid.hpp"
#include "isc/parallel.hpp"
#include "isc/performance.hpp"
#include "isc/plant.hpp"

namespace isc {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] double width() const { return hi - lo; }
    [[nodiscard]] bool contains(double v) const { return v >= lo && v <= hi; }
};

enum class EquilibriumStatus { ok, no_root, multiple_roots, not_converged };

inline const char* to_string(EquilibriumStatus s) {
    switch (s) {
        case EquilibriumStatus::ok: return "ok";
        case EquilibriumStatus::no_root: return "no_root";
        case EquilibriumStatus::multiple_roots: return "multiple_roots";
        case EquilibriumStatus::not_converged: return "not_converged";
    }
    return "?";
}

namespace detail {

struct RootScan {
    std::vector<Interval> brackets;  // one per sign change
};

/// Sign changes of g over [lo, hi] on `cells` uniform cells. An exact zero
/// at a node counts once.
template <class G>
RootScan scan_roots(G&& g, Interval box, std::size_t cells) {
    RootScan out;
    const double dx = box.width() / static_cast<double>(cells);
    double x_prev = box.lo;
    double g_prev = g(x_prev);
    if (g_prev == 0.0) out.brackets.push_back({x_prev, x_prev});
    for (std::size_t i = 1; i <= cells; ++i) {
        const double x = i == cells ? box.hi : box.lo + dx * static_cast<double>(i);
        const double gx = g(x);
        if (gx == 0.0) {
            out.brackets.push_back({x, x});
        } else if (g_prev != 0.0 && (g_prev < 0.0) != (gx < 0.0)) {
            out.brackets.push_back({x_prev, x});
        }
        x_prev = x;
        g_prev = gx;
    }
    return out;
}

template <class G>
double bisect(G&& g, Interval br, double tol) {
    double lo = br.lo;
    double hi = br.hi;
    double g_lo = g(lo);
    if (g_lo == 0.0) return lo;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (gm == 0.0) return mid;
        if ((gm < 0.0) == (g_lo < 0.0)) {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline double relative_gap(double value, double reference) {
    return std::abs(value - reference) / std::max(std::abs(reference), 1.0);
}

}  // namespace detail

// =============================================================================
// Equilibria
// =============================================================================

struct StaticEquilibrium {
    double rho = std::numeric_limits<double>::quiet_NaN();
    EquilibriumStatus status = EquilibriumStatus::no_root;
    std::size_t root_count = 0;
    bool stable = false;      // ∂ρ̇/∂ρ < 0 at the root
    double residual = 0.0;    // |density_rhs| / ((k_ρ/L)·Q)
};

/// Root of density_rhs(·, u) on rho_box by sign-change scan + bisection.
/// Several sign changes are reported as multiple_roots (the stable root
/// closest to the box origin is still returned).
inline StaticEquilibrium solve_equilibrium_static(double u, const HighwayParams& p, Interval rho_box,
                                                  std::size_t scan_cells = 2000) {
    auto g = [&](double rho) { return density_rhs(rho, u, p); };
    const auto scan = detail::scan_roots(g, rho_box, scan_cells);
    StaticEquilibrium eq;
    eq.root_count = scan.brackets.size();
    if (scan.brackets.empty()) return eq;

    std::vector<double> roots;
    for (const auto& br : scan.brackets) roots.push_back(detail::bisect(g, br, 1e-10));
    auto slope = [&](double r) {
        const double d = 1e-6 * std::max(1.0, std::abs(r));
        return (g(r + d) - g(r - d)) / (2 * d);
    };
    std::size_t pick = 0;
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (slope(roots[i]) < 0.0) {
            pick = i;
            break;
        }
    }
    eq.rho = roots[pick];
    eq.stable = slope(eq.rho) < 0.0;
    eq.residual = std::abs(g(eq.rho)) / (p.k_rho / p.length * p.demand);
    eq.status = roots.size() == 1 ? EquilibriumStatus::ok : EquilibriumStatus::multiple_roots;
    return eq;
}

/// Box Λ_θ for the dynamic-driver plant.
struct ThetaBox {
    Interval q_el{0.0, 2170.0};
    Interval rho{0.0, 50.0};
};

struct DynamicEquilibrium {
    PlantState theta{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    EquilibriumStatus status = EquilibriumStatus::no_root;
    std::size_t root_count = 0;   // density roots at the converged inflow
    bool stable = false;
    bool newton_converged = false;
    bool inflow_saturated = false;  // q_EL pinned at 0 or Q by the projection
    double residual = 0.0;          // max-norm of full_rhs scaled by ε₀
};

/// Forward simulation of the static-inflow plant under constant u. Integrates
/// in chunks and stops early once the state is stationary to 1e-12.
inline double settle_static(double u, const HighwayParams& p, double rho0, double horizon, double h) {
    HybridSystem sys;
    sys.state_dim = 1;
    sys.state_names = {"rho"};
    sys.flow_map = [&](std::span<const double> x, std::span<double> dx) {
        dx[0] = density_rhs(x[0], u, p) / p.eps0;
    };
    State x{rho0};
    const double chunk = std::min(horizon, 1.0 * p.eps0);
    for (double t = 0.0; t < horizon - 1e-12;) {
        const double span = std::min(chunk, horizon - t);
        IntegratorConfig cfg{h, span, 0, 1'000'000'000};
        const auto tr = simulate(sys, x, cfg);
        const double prev = x[0];
        x = tr.back().x;
        t += span;
        if (!std::isfinite(x[0])) break;
        if (std::abs(x[0] - prev) <= 1e-12 * std::max(1.0, std::abs(x[0]))) break;
    }
    return x[0];
}

/// Forward simulation of the dynamic-driver plant (projected onto q ∈ [0, Q]).
inline PlantState settle_dynamic(double u, const HighwayParams& p, PlantState theta0, double horizon, double h) {
    HybridSystem sys;
    sys.state_dim = 2;
    sys.state_names = {"q_EL", "rho"};
    sys.flow_map = [&](std::span<const double> x, std::span<double> dx) {
        const auto d = full_rhs(PlantState{std::clamp(x[0], 0.0, p.demand), x[1]}, u, p);
        dx[0] = d[0];
        dx[1] = d[1];
    };
    sys.projections.push_back({0, 0.0, p.demand});
    State x{theta0.q_el, theta0.rho};
    const double chunk = std::min(horizon, 1.0 * p.eps0);
    for (double t = 0.0; t < horizon - 1e-12;) {
        const double span = std::min(chunk, horizon - t);
        IntegratorConfig cfg{h, span, 0, 1'000'000'000};
        const auto tr = simulate(sys, x, cfg);
        const State prev = x;
        x = tr.back().x;
        t += span;
        if (!std::isfinite(x[0]) || !std::isfinite(x[1])) break;
        if (std::abs(x[0] - prev[0]) <= 1e-12 * std::max(1.0, std::abs(x[0])) &&
            std::abs(x[1] - prev[1]) <= 1e-12 * std::max(1.0, std::abs(x[1]))) {
            break;
        }
    }
    return {x[0], x[1]};
}

/// Equilibrium of the dynamic-driver plant: a short forward simulation
/// seeds a damped Newton iteration on full_rhs = 0 (finite-difference
/// Jacobian). When q_EL is pinned at a bound the Newton step is taken in ρ
/// alone. If Newton fails, a long forward simulation is used instead.
inline DynamicEquilibrium solve_equilibrium_dynamic(double u, const HighwayParams& p, const ThetaBox& box,
                                                    double h = 1e-3) {
    DynamicEquilibrium eq;
    auto rhs = [&](const PlantState& th) {
        auto d = full_rhs(PlantState{std::clamp(th.q_el, 0.0, p.demand), th.rho}, u, p);
        d[0] *= p.eps0;
        d[1] *= p.eps0;
        return d;
    };
    auto norm = [](const std::array<double, 2>& v) { return std::max(std::abs(v[0]), std::abs(v[1])); };

    const PlantState seed0{0.5 * (box.q_el.lo + box.q_el.hi), box.rho.lo};
    PlantState th = settle_dynamic(u, p, seed0, 10.0 * p.eps0, h);

    const double q_raw = 0.5 * p.demand - p.a_tilde * u;
    eq.inflow_saturated = q_raw <= 0.0 || q_raw >= p.demand;
    bool converged = false;
    for (int it = 0; it < 100 && std::isfinite(th.rho); ++it) {
        const auto f = rhs(th);
        if (norm(f) <= 1e-10) {
            converged = true;
            break;
        }
        const double dq = 1e-6 * std::max(1.0, std::abs(th.q_el));
        const double dr = 1e-6 * std::max(1.0, std::abs(th.rho));
        const auto fq = rhs({th.q_el + dq, th.rho});
        const auto fqm = rhs({th.q_el - dq, th.rho});
        const auto fr = rhs({th.q_el, th.rho + dr});
        const auto frm = rhs({th.q_el, th.rho - dr});
        const double j00 = (fq[0] - fqm[0]) / (2 * dq), j01 = (fr[0] - frm[0]) / (2 * dr);
        const double j10 = (fq[1] - fqm[1]) / (2 * dq), j11 = (fr[1] - frm[1]) / (2 * dr);
        double step_q = 0.0;
        double step_r = 0.0;
        const double det = j00 * j11 - j01 * j10;
        if (std::abs(j00) > 1e-12 && std::abs(det) > 1e-14) {
            step_q = -(j11 * f[0] - j01 * f[1]) / det;
            step_r = -(-j10 * f[0] + j00 * f[1]) / det;
        } else if (std::abs(j11) > 1e-14) {
            step_r = -f[1] / j11;
        } else {
            break;
        }
        double lambda = 1.0;
        const double f0 = norm(f);
        PlantState trial;
        for (int ls = 0; ls < 40; ++ls, lambda *= 0.5) {
            trial = {std::clamp(th.q_el + lambda * step_q, 0.0, p.demand), th.rho + lambda * step_r};
            if (norm(rhs(trial)) < f0) break;
        }
        th = trial;
    }
    eq.newton_converged = converged;
    if (!converged) {
        th = settle_dynamic(u, p, seed0, 50.0 / p.eps0, h);
        converged = norm(rhs(th)) <= 1e-8;
    }
    eq.theta = th;
    eq.residual = norm(rhs(th));

    // Density roots at the converged inflow, and local stability.
    const double q = th.q_el;
    auto g = [&](double rho) { return q - segment_outflow(rho, p); };
    eq.root_count = detail::scan_roots(g, box.rho, 2000).brackets.size();
    const double d = 1e-6 * std::max(1.0, std::abs(th.rho));
    const double outflow_slope = (segment_outflow(th.rho + d, p) - segment_outflow(th.rho - d, p)) / (2 * d);
    eq.stable = outflow_slope > 0.0;

    if (!converged) {
        eq.status = EquilibriumStatus::not_converged;
    } else if (!box.rho.contains(th.rho) || !box.q_el.contains(th.q_el) || eq.root_count == 0) {
        eq.status = EquilibriumStatus::no_root;
    } else if (eq.root_count > 1) {
        eq.status = EquilibriumStatus::multiple_roots;
    } else {
        eq.status = EquilibriumStatus::ok;
    }
    return eq;
}

// =============================================================================
// Response map
// =============================================================================

struct ResponseMapOptions {
    Interval u_box{-40.0, 40.0};
    std::size_t n_grid = 801;
    Interval rho_box{0.0, 50.0};
    Interval q_box{0.0, 2170.0};  // dynamic variant only
    double rho_ref = 20.0;
    std::size_t n_seeds = 5;
    bool with_oracle = true;
    double oracle_horizon = 0.0;  // hours; 0 → 50/ε₀
    double oracle_h = 0.0;        // 0 → chosen from the plant's fastest rate
    unsigned threads = 1;
};

struct ResponsePoint {
    double u = 0.0;
    std::vector<double> ell;  // equilibrium plant state
    double phi_tilde = std::numeric_limits<double>::quiet_NaN();
    EquilibriumStatus status = EquilibriumStatus::no_root;
    bool unique_equilibrium = false;
    bool stable = false;
    double residual = 0.0;
    bool basin_ok = false;  // every forward-simulation seed settles on ℓ(u)
    double oracle_gap = std::numeric_limits<double>::quiet_NaN();  // max relative gap over seeds

    [[nodiscard]] bool valid() const { return status == EquilibriumStatus::ok || status == EquilibriumStatus::multiple_roots; }
};

struct ResponseMap {
    PlantVariant variant = PlantVariant::static_inflow;
    std::vector<std::string> ell_names;
    std::vector<ResponsePoint> points;
    double rho_ref = 20.0;
    Interval u_box;
    double u_star = std::numeric_limits<double>::quiet_NaN();
    double phi_star = std::numeric_limits<double>::quiet_NaN();
    double kappa_est = 0.0;            // min second difference of φ̃, clipped at 0
    double kappa_normalized = 0.0;     // same on unit-rescaled u and φ̃
    double curvature_at_optimum = 0.0; // second difference at the grid argmin
    double curvature_at_optimum_normalized = 0.0;
    double lipschitz_est = 0.0;        // max |second difference|
    bool oracle_checked = false;

    [[nodiscard]] bool poisoned() const {
        return std::any_of(points.begin(), points.end(), [](const ResponsePoint& p) { return !p.valid(); });
    }
};

/// Default forward-oracle step: RK4 stays well inside its stability region
/// for the plant's fastest linearized rate.
inline double default_oracle_step(const HighwayParams& p) {
    const double fastest = std::max(p.k_rho * p.v_free / p.length, p.k_m) / p.eps0;
    return 0.5 / fastest;
}

namespace detail {

inline ResponsePoint evaluate_point(double u, PlantVariant variant, const HighwayParams& p,
                                    const ResponseMapOptions& opt) {
    ResponsePoint pt;
    pt.u = u;
    if (variant == PlantVariant::static_inflow) {
        const auto eq = solve_equilibrium_static(u, p, opt.rho_box);
        pt.status = eq.status;
        pt.unique_equilibrium = eq.root_count == 1;
        pt.stable = eq.stable;
        pt.residual = eq.residual;
        pt.ell = {eq.rho};
        if (pt.valid()) pt.phi_tilde = performance_index(eq.rho, opt.rho_ref);
    } else {
        const ThetaBox box{opt.q_box, opt.rho_box};
        const auto eq = solve_equilibrium_dynamic(u, p, box);
        pt.status = eq.status;
        pt.unique_equilibrium = eq.root_count == 1 && eq.status == EquilibriumStatus::ok;
        pt.stable = eq.stable;
        pt.residual = eq.residual;
        pt.ell = {eq.theta.q_el, eq.theta.rho};
        if (pt.valid()) pt.phi_tilde = performance_index(eq.theta.rho, opt.rho_ref);
    }
    return pt;
}

inline void forward_oracle(ResponsePoint& pt, PlantVariant variant, const HighwayParams& p,
                           const ResponseMapOptions& opt) {
    const double horizon = opt.oracle_horizon > 0.0 ? opt.oracle_horizon : 50.0 / p.eps0;
    const double h = opt.oracle_h > 0.0 ? opt.oracle_h : default_oracle_step(p);
    const std::size_t n = std::max<std::size_t>(opt.n_seeds, 1);
    double worst = 0.0;
    bool all_ok = pt.valid();
    for (std::size_t s = 0; s < n; ++s) {
        const double frac = n == 1 ? 0.5 : static_cast<double>(s) / static_cast<double>(n - 1);
        if (variant == PlantVariant::static_inflow) {
            const double rho0 = opt.rho_box.lo + frac * opt.rho_box.width();
            const double rho = settle_static(pt.u, p, rho0, horizon, h);
            if (!std::isfinite(rho) || !opt.rho_box.contains(rho)) {
                all_ok = false;
                worst = std::numeric_limits<double>::infinity();
                continue;
            }
            if (pt.valid()) {
                const double gap = relative_gap(rho, pt.ell[0]);
                worst = std::max(worst, gap);
                if (gap > 1e-3) all_ok = false;
            }
        } else {
            // Seeds on the diagonal of Λ_θ, from (q_lo, ρ_lo) to (q_hi, ρ_hi),
            // alternated with the anti-diagonal.
            const double fq = s % 2 == 0 ? frac : 1.0 - frac;
            const PlantState th0{opt.q_box.lo + fq * opt.q_box.width(), opt.rho_box.lo + frac * opt.rho_box.width()};
            const auto th = settle_dynamic(pt.u, p, th0, horizon, h);
            if (!std::isfinite(th.rho) || !opt.rho_box.contains(th.rho)) {
                all_ok = false;
                worst = std::numeric_limits<double>::infinity();
                continue;
            }
            if (pt.valid()) {
                const double gap = std::max(relative_gap(th.rho, pt.ell[1]), relative_gap(th.q_el, pt.ell[0]));
                worst = std::max(worst, gap);
                if (gap > 1e-3) all_ok = false;
            }
        }
    }
    pt.oracle_gap = pt.valid() ? worst : std::numeric_limits<double>::quiet_NaN();
    pt.basin_ok = all_ok;
}

}  // namespace detail

/// φ̃(u) through the equilibrium solver; NaN where no valid equilibrium.
inline double reduced_cost(double u, PlantVariant variant, const HighwayParams& p, const ResponseMapOptions& opt) {
    return detail::evaluate_point(u, variant, p, opt).phi_tilde;
}

/// Golden-section minimization of f on [lo, hi].
template <class F>
double golden_section_min(F&& f, double lo, double hi, double tol = 1e-9) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// Curvature diagnostics on a uniform grid of φ̃ (invalid points skipped).
inline void compute_curvature(ResponseMap& map) {
    const auto& pts = map.points;
    if (pts.size() < 3) return;
    const double du = pts[1].u - pts[0].u;
    double phi_min = std::numeric_limits<double>::infinity();
    double phi_max = -std::numeric_limits<double>::infinity();
    for (const auto& pt : pts) {
        if (!pt.valid()) continue;
        phi_min = std::min(phi_min, pt.phi_tilde);
        phi_max = std::max(phi_max, pt.phi_tilde);
    }
    const double u_scale = map.u_box.width();
    const double phi_scale = phi_max > phi_min ? phi_max - phi_min : 1.0;
    const double to_unit = u_scale * u_scale / phi_scale;

    double kmin = std::numeric_limits<double>::infinity();
    double lmax = 0.0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].valid() && (!pts[best].valid() || pts[i].phi_tilde < pts[best].phi_tilde)) best = i;
    }
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
        if (!pts[i - 1].valid() || !pts[i].valid() || !pts[i + 1].valid()) continue;
        const double d2 = (pts[i + 1].phi_tilde - 2.0 * pts[i].phi_tilde + pts[i - 1].phi_tilde) / (du * du);
        kmin = std::min(kmin, d2);
        lmax = std::max(lmax, std::abs(d2));
    }
    map.kappa_est = std::isfinite(kmin) ? std::max(0.0, kmin) : 0.0;
    map.kappa_normalized = map.kappa_est * to_unit;
    map.lipschitz_est = lmax;
    const std::size_t c = std::clamp<std::size_t>(best, 1, pts.size() - 2);
    if (pts[c - 1].valid() && pts[c].valid() && pts[c + 1].valid()) {
        map.curvature_at_optimum =
            (pts[c + 1].phi_tilde - 2.0 * pts[c].phi_tilde + pts[c - 1].phi_tilde) / (du * du);
        map.curvature_at_optimum_normalized = map.curvature_at_optimum * to_unit;
    }
}

/// Tabulates ℓ and φ̃ on a uniform grid over the incentive box, refines u*
/// by golden section inside the bracketing cells, and (optionally) checks
/// every grid equilibrium against forward simulations from n_seeds seeds.
inline ResponseMap build_response_map(const HighwayParams& p, PlantVariant variant, const ResponseMapOptions& opt) {
    p.validate();
    if (opt.n_grid < 3) throw ConfigError("response map: n_grid must be >= 3");
    if (!(opt.u_box.hi > opt.u_box.lo)) throw ConfigError("response map: empty incentive box");
    ResponseMap map;
    map.variant = variant;
    map.ell_names = variant == PlantVariant::static_inflow ? std::vector<std::string>{"rho"}
                                                           : std::vector<std::string>{"q_EL", "rho"};
    map.rho_ref = opt.rho_ref;
    map.u_box = opt.u_box;
    map.points.resize(opt.n_grid);
    const double du = opt.u_box.width() / static_cast<double>(opt.n_grid - 1);

    parallel_for(opt.n_grid, opt.threads, [&](std::size_t i) {
        const double u = i + 1 == opt.n_grid ? opt.u_box.hi : opt.u_box.lo + du * static_cast<double>(i);
        auto pt = detail::evaluate_point(u, variant, p, opt);
        if (opt.with_oracle) detail::forward_oracle(pt, variant, p, opt);
        map.points[i] = std::move(pt);
    });
    map.oracle_checked = opt.with_oracle;

    std::size_t best = opt.n_grid;
    for (std::size_t i = 0; i < opt.n_grid; ++i) {
        if (!map.points[i].valid()) continue;
        if (best == opt.n_grid || map.points[i].phi_tilde < map.points[best].phi_tilde) best = i;
    }
    if (best < opt.n_grid) {
        const double lo = map.points[best == 0 ? 0 : best - 1].u;
        const double hi = map.points[best + 1 == opt.n_grid ? best : best + 1].u;
        auto f = [&](double u) {
            const double v = reduced_cost(u, variant, p, opt);
            return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        };
        map.u_star = golden_section_min(f, lo, hi, 1e-9);
        map.phi_star = f(map.u_star);
        if (!(map.phi_star <= map.points[best].phi_tilde)) {
            map.u_star = map.points[best].u;
            map.phi_star = map.points[best].phi_tilde;
        }
    }
    compute_curvature(map);
    return map;
}

// =============================================================================
// Viability
// =============================================================================

struct ViabilityReport {
    bool a1_unique_stable = false;  // unique, stable equilibrium in the box for every grid u
    bool a2_strictly_convex = false;
    bool a3_strongly_convex = false;
    bool poisoned = false;
    double kappa_est = 0.0;
    double kappa_normalized = 0.0;
    double curvature_at_optimum = 0.0;
    double curvature_at_optimum_normalized = 0.0;
    double lipschitz_est = 0.0;
    double u_star = std::numeric_limits<double>::quiet_NaN();
    double phi_star = std::numeric_limits<double>::quiet_NaN();
    double max_oracle_gap = 0.0;
    std::size_t n_points = 0;
    std::size_t n_invalid = 0;
    std::size_t n_not_unique = 0;
    std::size_t n_unstable = 0;
    std::size_t n_basin_failures = 0;
    std::size_t n_nonconvex = 0;
    Interval valid_u_range{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};

    [[nodiscard]] bool all_positive() const {
        return a1_unique_stable && a2_strictly_convex && a3_strongly_convex && !poisoned;
    }
};

inline ViabilityReport viability_report(const ResponseMap& map) {
    ViabilityReport r;
    r.n_points = map.points.size();
    r.poisoned = map.poisoned();
    bool first_valid = true;
    for (const auto& pt : map.points) {
        if (!pt.valid()) {
            ++r.n_invalid;
            continue;
        }
        if (first_valid) r.valid_u_range.lo = pt.u;
        first_valid = false;
        r.valid_u_range.hi = pt.u;
        if (!pt.unique_equilibrium) ++r.n_not_unique;
        if (!pt.stable) ++r.n_unstable;
        if (map.oracle_checked && !pt.basin_ok) ++r.n_basin_failures;
        if (map.oracle_checked && std::isfinite(pt.oracle_gap)) r.max_oracle_gap = std::max(r.max_oracle_gap, pt.oracle_gap);
        if (map.oracle_checked && !std::isfinite(pt.oracle_gap)) r.max_oracle_gap = std::numeric_limits<double>::infinity();
    }
    r.a1_unique_stable = map.oracle_checked && r.n_invalid == 0 && r.n_not_unique == 0 && r.n_unstable == 0 &&
                         r.n_basin_failures == 0;

    const auto& pts = map.points;
    std::size_t checked = 0;
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
        if (!pts[i - 1].valid() || !pts[i].valid() || !pts[i + 1].valid()) continue;
        ++checked;
        const double d2 = pts[i + 1].phi_tilde - 2.0 * pts[i].phi_tilde + pts[i - 1].phi_tilde;
        if (!(d2 > 0.0)) ++r.n_nonconvex;
    }
    r.a2_strictly_convex = checked > 0 && r.n_nonconvex == 0 && !r.poisoned;
    r.kappa_est = map.kappa_est;
    r.kappa_normalized = map.kappa_normalized;
    r.curvature_at_optimum = map.curvature_at_optimum;
    r.curvature_at_optimum_normalized = map.curvature_at_optimum_normalized;
    r.lipschitz_est = map.lipschitz_est;
    r.a3_strongly_convex = map.kappa_est > 0.0 && !r.poisoned;
    r.u_star = map.u_star;
    r.phi_star = map.phi_star;
    return r;
}

// =============================================================================
// Averaging diagnostics
// =============================================================================

/// Time average over one dither period of the GISC update −kφ̃(û + ε_a μ₁)M(μ)
/// at frozen û, with μ integrated by RK4 from (1, 0).
inline double period_averaged_gisc_update(double u_hat, const std::function<double(double)>& cost_map,
                                          const ControllerGains& g, const DitherConfig& d,
                                          std::size_t steps_per_period = 2000) {
    if (d.m() != 1) throw ConfigError("period average: single incentive only");
    const double period = d.eps_p / d.omega[0].value();
    const double h = period / static_cast<double>(steps_per_period);
    HybridSystem osc;
    osc.state_dim = 2;
    osc.state_names = {"mu1", "mu2"};
    osc.flow_map = [&](std::span<const double> x, std::span<double> dx) { oscillator_rhs(x, d, dx); };
    const auto tr = simulate(osc, initial_dither_phase(1), IntegratorConfig{h, period, 0, 1});
    auto update = [&](const State& mu) {
        return -g.k * cost_map(u_hat + d.eps_a * mu[0]) * (2.0 / d.eps_a) * mu[0];
    };
    double acc = 0.0;
    for (std::size_t i = 1; i < tr.samples.size(); ++i) {
        const double dt = tr.samples[i].time.t - tr.samples[i - 1].time.t;
        acc += 0.5 * dt * (update(tr.samples[i].x) + update(tr.samples[i - 1].x));
    }
    return acc / period;
}

}  // namespace isc
