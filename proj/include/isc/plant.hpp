#pragma once

// Socio-technical model of a highway segment with an Express lane (EL) and
// a general-purpose lane (GP). Units: hours, miles, vehicles.

#include <array>
#include <cmath>
#include <string>

#include "isc/errors.hpp"

namespace isc {

/// Plant constants. Speeds in mph, densities in veh/mi, length in mi,
/// demand in veh/hr.
struct HighwayParams {
    double v_free = 65.0;
    double v_jam = 5.0;
    double rho_jam = 80.0;
    double rho_crit = 25.0;
    double length = 0.7;
    double demand = 2170.0;
    double a = 0.334;           // travel-time weight
    double b = 0.335;           // toll weight
    double gamma_el = 1.71781;  // EL cost offset
    double gamma_gp = 0.0;      // GP cost offset
    double delta = 1.0;         // GP travel-time factor, >= 1
    double a_tilde = 100.0;     // toll weight in the affine marginal cost
    double k_m = 1.0;           // driver-behavior gain
    double k_rho = 1.0;         // traffic-flow gain
    double eps0 = 1.0;          // plant timescale

    void validate() const {
        auto fail = [](const std::string& m) { throw ConfigError("plant: " + m); };
        if (!(v_free > v_jam)) fail("v_free must exceed v_jam");
        if (!(v_jam > 0.0)) fail("v_jam must be positive");
        if (!(rho_jam > rho_crit)) fail("rho_jam must exceed rho_crit");
        if (!(rho_crit > 0.0)) fail("rho_crit must be positive");
        if (!(length > 0.0)) fail("L must be positive");
        if (!(demand > 0.0)) fail("Q must be positive");
        if (!(eps0 > 0.0)) fail("eps0 must be positive");
        if (!(k_m > 0.0)) fail("k_m must be positive");
        if (!(k_rho > 0.0)) fail("k_rho must be positive");
        if (!(delta >= 1.0)) fail("delta must be >= 1");
        if (!(a >= 0.0) || !(b >= 0.0) || !(a_tilde >= 0.0)) fail("cost weights a, b, a_tilde must be non-negative");
        if (!std::isfinite(gamma_el) || !std::isfinite(gamma_gp)) fail("cost offsets must be finite");
    }
};

enum class PlantVariant { static_inflow, dynamic_behavior };

inline const char* to_string(PlantVariant v) {
    return v == PlantVariant::static_inflow ? "static" : "dynamic";
}

inline PlantVariant parse_plant_variant(const std::string& s) {
    if (s == "static") return PlantVariant::static_inflow;
    if (s == "dynamic") return PlantVariant::dynamic_behavior;
    throw ConfigError("unknown plant variant '" + s + "' (valid: static, dynamic)");
}

/// Mollified equilibrium velocity v̄(ρ); strictly decreasing, range (v_jam, v_free).
inline double mean_velocity(double rho, const HighwayParams& p) {
    const double slope = 4.0 / (p.rho_jam - p.rho_crit);
    const double mid = 0.5 * (p.rho_jam + p.rho_crit);
    return (p.v_free - p.v_jam) / (1.0 + std::exp(slope * (rho - mid))) + p.v_jam;
}

/// Outflow v̄(ρ)ρ of the segment, veh/hr.
inline double segment_outflow(double rho, const HighwayParams& p) { return mean_velocity(rho, p) * rho; }

/// c_EL(ρ,u) − c_GP(ρ) with the travel-time based costs.
inline double static_marginal_cost(double rho, double u, const HighwayParams& p) {
    const double travel_time = p.length / mean_velocity(rho, p);
    const double c_el = p.a * travel_time + p.b * u + p.gamma_el;
    const double c_gp = p.a * travel_time * p.delta + p.gamma_gp;
    return c_el - c_gp;
}

/// Logistic EL inflow when drivers respond instantaneously. In (0, Q).
inline double static_inflow(double rho, double u, const HighwayParams& p) {
    return p.demand / (1.0 + std::exp(static_marginal_cost(rho, u, p)));
}

/// ρ̇ of the reduced (static-inflow) model, without the 1/ε₀ factor.
inline double density_rhs(double rho, double u, const HighwayParams& p) {
    return p.k_rho / p.length * (static_inflow(rho, u, p) - segment_outflow(rho, p));
}

/// Rate of change of the EL inflow, driven by the affine marginal cost
/// (q_EL − Q/2) + ã·u and projected so q_EL stays in [0, Q].
inline double behavior_rhs(double q_el, double u, const HighwayParams& p) {
    if (!(q_el >= 0.0 && q_el <= p.demand)) {
        throw ContractViolation("behavior_rhs: q_EL = " + std::to_string(q_el) + " outside [0, Q]");
    }
    const double psi = -((q_el - 0.5 * p.demand) + p.a_tilde * u);
    if (q_el <= 0.0 && psi < 0.0) return 0.0;
    if (q_el >= p.demand && psi > 0.0) return 0.0;
    return psi;
}

/// Dynamic-driver plant state θ = (q_EL, ρ).
struct PlantState {
    double q_el = 0.0;
    double rho = 0.0;
};

/// (1/ε₀)·(k_m Ψ(q_EL, u), k_ρ (q_EL − v̄(ρ)ρ)/L).
inline std::array<double, 2> full_rhs(const PlantState& theta, double u, const HighwayParams& p) {
    return {p.k_m * behavior_rhs(theta.q_el, u, p) / p.eps0,
            p.k_rho * (theta.q_el - segment_outflow(theta.rho, p)) / p.length / p.eps0};
}

/// Plant constants of the fast-driver (static inflow) MnPASS scenario.
inline HighwayParams mnpass_static_params() { return HighwayParams{}; }

/// Plant constants of the dynamic driver-behavior scenario.
inline HighwayParams mnpass_dynamic_params() {
    HighwayParams p;
    p.eps0 = 0.1;
    return p;
}

}  // namespace isc
