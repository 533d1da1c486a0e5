#pragma once

// CSV writers shared by the CLI and the acceptance run. Times are in hours.

#include <ostream>
#include <vector>

#include "isc/analysis.hpp"
#include "isc/controllers.hpp"
#include "isc/experiments.hpp"
#include "isc/hybrid.hpp"

namespace isc {

/// t, j, plant and controller states, the applied u, the dither, then φ.
inline std::vector<TraceColumn> trace_columns(const ClosedLoop& loop) {
    std::vector<TraceColumn> cols;
    const auto& names = loop.system.state_names;
    auto state = [&](std::size_t i) {
        cols.push_back({names[i], [i](const TraceSample& s) { return s.x[i]; }});
    };
    for (std::size_t i = 0; i < loop.mu_index(); ++i) state(i);
    cols.push_back({"u", [&loop](const TraceSample& s) { return loop.input(s.x); }});
    for (std::size_t i = loop.mu_index(); i < names.size(); ++i) state(i);
    cols.push_back({"phi", [&loop](const TraceSample& s) { return loop.cost(s.x); }});
    return cols;
}

inline void write_closed_loop_trace(std::ostream& os, const ClosedLoop& loop, const HybridTrace& tr) {
    const auto cols = trace_columns(loop);
    write_trace_csv(os, tr, cols);
}

inline void write_mse_csv(std::ostream& os, const EnsembleResult& r) {
    os << "t,mse\n";
    for (std::size_t i = 0; i < r.grid.size(); ++i) {
        os << format_number(r.grid[i]) << ',' << format_number(r.mse_curve[i]) << '\n';
    }
}

inline void write_response_map_csv(std::ostream& os, const ResponseMap& map) {
    os << 'u';
    for (const auto& n : map.ell_names) os << ',' << n;
    os << ",phi_tilde,unique,stable,basin_ok,oracle_gap,status\n";
    for (const auto& pt : map.points) {
        os << format_number(pt.u);
        for (double v : pt.ell) os << ',' << format_number(v);
        os << ',' << format_number(pt.phi_tilde) << ',' << pt.unique_equilibrium << ',' << pt.stable << ','
           << pt.basin_ok << ',' << format_number(pt.oracle_gap) << ',' << to_string(pt.status) << '\n';
    }
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& res) {
    os << "gamma_el";
    for (auto k : res.controllers) os << ",tmse_" << to_string(k);
    os << '\n';
    for (const auto& row : res.rows) {
        os << format_number(row.gamma_el);
        for (double v : row.mean_tmse) os << ',' << format_number(v);
        os << '\n';
    }
}

/// full_rhs sampled on an n×n grid of the (q_EL, ρ) box, for each u.
inline void write_phase_plane_csv(std::ostream& os, const HighwayParams& p, const std::vector<double>& u_values,
                                  Interval q_box, Interval rho_box, std::size_t n) {
    os << "u,q_EL,rho,dq_EL,drho\n";
    for (double u : u_values) {
        for (std::size_t i = 0; i < n; ++i) {
            const double q = q_box.lo + q_box.width() * static_cast<double>(i) / static_cast<double>(n - 1);
            for (std::size_t k = 0; k < n; ++k) {
                const double rho = rho_box.lo + rho_box.width() * static_cast<double>(k) / static_cast<double>(n - 1);
                const auto d = full_rhs(PlantState{q, rho}, u, p);
                os << format_number(u) << ',' << format_number(q) << ',' << format_number(rho) << ','
                   << format_number(d[0]) << ',' << format_number(d[1]) << '\n';
            }
        }
    }
}

}  // namespace isc
