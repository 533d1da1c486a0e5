#pragma once

// Audits of recorded closed-loop traces against the structural invariants
// of the hybrid controllers and the dither.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "isc/controllers.hpp"
#include "isc/hybrid.hpp"

namespace isc {

struct TraceAudit {
    double max_norm_error = 0.0;          // max | |μ_pair| − 1 |
    double max_tau_excursion = 0.0;       // distance of τ outside [T0, T]
    double max_interjump_error = 0.0;     // | flow time between jumps − 2(T − T0) |
    double max_jump_drift = 0.0;          // change of (û, μ) across a jump
    double max_q_excursion = 0.0;         // distance of q_EL outside [0, Q]
    std::int64_t jumps = 0;
    std::size_t interjump_intervals = 0;  // complete intervals measured
};

inline TraceAudit audit_trace(const HybridTrace& tr, const ClosedLoop& loop) {
    TraceAudit a;
    const std::size_t mu = loop.mu_index();
    const std::size_t m = loop.controller.m;
    const bool hybrid = loop.kind == ControllerKind::hmisc;
    const double T0 = loop.gains.T0, T = loop.gains.T;

    for (const auto& s : tr.samples) {
        for (std::size_t i = 0; i < m; ++i) {
            const double n = std::hypot(s.x[mu + 2 * i], s.x[mu + 2 * i + 1]);
            a.max_norm_error = std::max(a.max_norm_error, std::abs(n - 1.0));
        }
        if (hybrid) {
            const double tau = s.x[loop.tau_index()];
            a.max_tau_excursion = std::max({a.max_tau_excursion, T0 - tau, tau - T});
        }
        if (loop.variant == PlantVariant::dynamic_behavior) {
            const double q = s.x[loop.q_el_index()];
            a.max_q_excursion = std::max({a.max_q_excursion, -q, q - loop.params.demand});
        }
    }
    a.jumps = tr.jumps();
    if (!hybrid) return a;

    double last_jump_t = -1.0;
    for (std::size_t k = 1; k < tr.samples.size(); ++k) {
        const auto& pre = tr.samples[k - 1];
        const auto& post = tr.samples[k];
        if (post.time.j != pre.time.j + 1) continue;
        double drift = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            drift = std::max(drift, std::abs(post.x[loop.u_hat_index() + i] - pre.x[loop.u_hat_index() + i]));
        }
        for (std::size_t i = 0; i < 2 * m; ++i) drift = std::max(drift, std::abs(post.x[mu + i] - pre.x[mu + i]));
        a.max_jump_drift = std::max(a.max_jump_drift, drift);
        if (last_jump_t >= 0.0) {
            a.max_interjump_error =
                std::max(a.max_interjump_error, std::abs(post.time.t - last_jump_t - 2.0 * (T - T0)));
            ++a.interjump_intervals;
        }
        last_jump_t = post.time.t;
    }
    return a;
}

}  // namespace isc
