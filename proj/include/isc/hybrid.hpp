#pragma once

// Hybrid dynamical systems  x ∈ C: ẋ = F(x),  x ∈ D: x⁺ = G(x)
// and a fixed-step RK4 integrator producing solutions on hybrid time domains.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "isc/errors.hpp"

namespace isc {

using State = std::vector<double>;
using FlowMap = std::function<void(std::span<const double> x, std::span<double> dx)>;
using JumpMap = std::function<void(std::span<const double> x, std::span<double> x_plus)>;
using SetPredicate = std::function<bool(std::span<const double> x)>;

struct HybridTime {
    double t = 0.0;
    std::int64_t j = 0;
};

/// A component flowing at a known constant rate whose upper threshold
/// bounds the jump set. Flow steps are shortened so the threshold is hit
/// exactly.
struct TimerClamp {
    std::size_t index = 0;
    double rate = 1.0;
    double threshold = 0.0;
};

/// Interval onto which a component is projected after every flow step.
struct ComponentBounds {
    std::size_t index = 0;
    double lower = 0.0;
    double upper = 0.0;
};

/// H = (C, F, D, G). An empty flow_set means C = Rⁿ; an empty jump_set (or
/// jump_map) means D = ∅.
struct HybridSystem {
    std::size_t state_dim = 0;
    std::vector<std::string> state_names;
    FlowMap flow_map;
    JumpMap jump_map;
    SetPredicate flow_set;
    SetPredicate jump_set;
    std::optional<TimerClamp> timer;
    std::vector<ComponentBounds> projections;

    [[nodiscard]] bool has_jumps() const { return static_cast<bool>(jump_set) && static_cast<bool>(jump_map); }
    [[nodiscard]] bool in_flow_set(std::span<const double> x) const { return !flow_set || flow_set(x); }
    [[nodiscard]] bool in_jump_set(std::span<const double> x) const { return has_jumps() && jump_set(x); }
};

struct IntegratorConfig {
    double h = 1e-3;
    double t_max = 1.0;
    std::int64_t j_max = 1'000'000;
    std::size_t record_stride = 1;

    void validate() const {
        if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("integrator: h must be positive");
        if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ConfigError("integrator: t_max must be positive");
        if (j_max < 0) throw ConfigError("integrator: j_max must be non-negative");
        if (record_stride < 1) throw ConfigError("integrator: record_stride must be >= 1");
    }
};

enum class TerminalReason { horizon, jump_budget, left_domain };
enum class StepEvent { flowed, jumped };

inline const char* to_string(TerminalReason r) {
    switch (r) {
        case TerminalReason::horizon: return "horizon";
        case TerminalReason::jump_budget: return "jump_budget";
        case TerminalReason::left_domain: return "left_domain";
    }
    return "?";
}

struct TraceSample {
    HybridTime time;
    State x;
};

struct HybridTrace {
    std::vector<std::string> state_names;
    std::vector<TraceSample> samples;
    TerminalReason terminal_reason = TerminalReason::horizon;

    [[nodiscard]] bool empty() const { return samples.empty(); }
    [[nodiscard]] const TraceSample& back() const { return samples.back(); }
    [[nodiscard]] std::int64_t jumps() const { return samples.empty() ? 0 : samples.back().time.j; }
};

/// Scratch buffers for RK4 stages; one per integrating thread.
class Rk4Workspace {
public:
    explicit Rk4Workspace(std::size_t n = 0) { resize(n); }

    void resize(std::size_t n) {
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &tmp_}) v->assign(n, 0.0);
    }
    [[nodiscard]] std::size_t size() const { return tmp_.size(); }

private:
    friend void flow_step(std::span<double>, double, const FlowMap&, Rk4Workspace&);
    State k1_, k2_, k3_, k4_, tmp_;
};

namespace detail {
inline void require_finite(std::span<const double> dx) {
    for (std::size_t i = 0; i < dx.size(); ++i) {
        if (!std::isfinite(dx[i])) {
            throw IntegrationError("non-finite derivative in component " + std::to_string(i), i);
        }
    }
}
}  // namespace detail

/// Classical 4th-order Runge–Kutta advance of x by h, in place.
inline void flow_step(std::span<double> x, double h, const FlowMap& f, Rk4Workspace& ws) {
    const std::size_t n = x.size();
    if (ws.size() != n) ws.resize(n);
    auto& k1 = ws.k1_;
    auto& k2 = ws.k2_;
    auto& k3 = ws.k3_;
    auto& k4 = ws.k4_;
    auto& tmp = ws.tmp_;

    f(x, k1);
    detail::require_finite(k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    f(tmp, k2);
    detail::require_finite(k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    f(tmp, k3);
    detail::require_finite(k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    f(tmp, k4);
    detail::require_finite(k4);
    for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

inline State flow_step(const State& x, double h, const FlowMap& f) {
    State out = x;
    Rk4Workspace ws(x.size());
    flow_step(out, h, f, ws);
    return out;
}

struct StepOutcome {
    StepEvent event = StepEvent::flowed;
    double dt = 0.0;
    std::int64_t dj = 0;
};

/// One step of the hybrid integrator, in place. Jumps take priority over
/// flows on C ∩ D. A flow step never exceeds `h_max` and is shortened to
/// land exactly on the timer threshold. Returns nullopt if x ∉ C ∪ D.
inline std::optional<StepOutcome> hybrid_step(std::span<double> x, const HybridSystem& sys, double h_max,
                                              Rk4Workspace& ws) {
    if (sys.in_jump_set(x)) {
        State next(x.size());
        sys.jump_map(x, next);
        std::copy(next.begin(), next.end(), x.begin());
        return StepOutcome{StepEvent::jumped, 0.0, 1};
    }
    if (!sys.in_flow_set(x)) return std::nullopt;

    double h = h_max;
    bool lands_on_threshold = false;
    if (sys.timer) {
        const auto& tc = *sys.timer;
        const double remaining = (tc.threshold - x[tc.index]) / tc.rate;
        if (remaining <= h) {
            h = remaining;
            lands_on_threshold = true;
        }
    }
    if (h <= 0.0) {
        // Already on the threshold but outside D: nothing left to integrate.
        return std::nullopt;
    }
    flow_step(x, h, sys.flow_map, ws);
    if (lands_on_threshold) x[sys.timer->index] = sys.timer->threshold;
    for (const auto& b : sys.projections) x[b.index] = std::clamp(x[b.index], b.lower, b.upper);
    return StepOutcome{StepEvent::flowed, h, 0};
}

/// Integrates from x0 until t_max, the jump budget, or exit from C ∪ D.
/// Samples are kept every `record_stride` flow steps, on both sides of every
/// jump, and at termination.
inline HybridTrace simulate(const HybridSystem& sys, const State& x0, const IntegratorConfig& cfg) {
    cfg.validate();
    if (x0.size() != sys.state_dim) {
        throw ConfigError("simulate: initial state has dimension " + std::to_string(x0.size()) + ", expected " +
                          std::to_string(sys.state_dim));
    }
    HybridTrace trace;
    trace.state_names = sys.state_names;
    if (!sys.in_flow_set(x0) && !sys.in_jump_set(x0)) {
        trace.terminal_reason = TerminalReason::left_domain;
        return trace;
    }

    State x = x0;
    HybridTime now{};
    Rk4Workspace ws(x.size());
    trace.samples.push_back({now, x});
    std::size_t since_record = 0;
    const double t_eps = 1e-12 * std::max(1.0, cfg.t_max);

    auto record = [&] {
        const auto& last = trace.samples.back();
        if (last.time.t != now.t || last.time.j != now.j) trace.samples.push_back({now, x});
        since_record = 0;
    };

    for (;;) {
        if (now.t >= cfg.t_max - t_eps) {
            trace.terminal_reason = TerminalReason::horizon;
            break;
        }
        const bool jumping = sys.in_jump_set(x);
        if (jumping && now.j >= cfg.j_max) {
            trace.terminal_reason = TerminalReason::jump_budget;
            break;
        }
        if (jumping) record();

        std::optional<StepOutcome> out;
        try {
            out = hybrid_step(x, sys, std::min(cfg.h, cfg.t_max - now.t), ws);
        } catch (const IntegrationError& e) {
            const std::size_t c = e.component();
            const std::string name = c < sys.state_names.size() ? sys.state_names[c] : std::to_string(c);
            char buf[160];
            std::snprintf(buf, sizeof buf, "non-finite derivative in '%s' at (t=%.9g, j=%lld)", name.c_str(), now.t,
                          static_cast<long long>(now.j));
            throw IntegrationError(buf, c, now.t, now.j);
        }
        if (!out) {
            trace.terminal_reason = TerminalReason::left_domain;
            break;
        }
        now.t += out->dt;
        now.j += out->dj;
        if (out->event == StepEvent::jumped) {
            record();
        } else if (++since_record >= cfg.record_stride) {
            record();
        }
    }
    record();
    return trace;
}

/// Value of component `index` at time t by linear interpolation between
/// samples. At a jump instant the post-jump value is returned.
inline double sample_at(const HybridTrace& trace, std::size_t index, double t) {
    const auto& s = trace.samples;
    if (s.empty()) throw ContractViolation("sample_at: empty trace");
    const double tol = 1e-9 * std::max(1.0, std::abs(s.back().time.t));
    if (t < s.front().time.t - tol || t > s.back().time.t + tol) {
        throw ContractViolation("sample_at: t outside trace horizon");
    }
    // First sample with time > t; the one before it is the latest sample at or before t.
    auto it = std::upper_bound(s.begin(), s.end(), t,
                               [](double tv, const TraceSample& smp) { return tv < smp.time.t; });
    if (it == s.begin()) return s.front().x[index];
    if (it == s.end()) return s.back().x[index];
    const auto& lo = *(it - 1);
    const auto& hi = *it;
    const double w = (t - lo.time.t) / (hi.time.t - lo.time.t);
    return lo.x[index] + w * (hi.x[index] - lo.x[index]);
}

/// Fixed 9-significant-digit rendering used by every CSV writer.
inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

struct TraceColumn {
    std::string name;
    std::function<double(const TraceSample&)> value;
};

/// CSV with header `t,j,<columns...>`.
inline void write_trace_csv(std::ostream& os, const HybridTrace& trace, std::span<const TraceColumn> columns) {
    os << "t,j";
    for (const auto& c : columns) os << ',' << c.name;
    os << '\n';
    for (const auto& s : trace.samples) {
        os << format_number(s.time.t) << ',' << s.time.j;
        for (const auto& c : columns) os << ',' << format_number(c.value(s));
        os << '\n';
    }
}

/// CSV with header `t,j,<state names...>`.
inline void write_trace_csv(std::ostream& os, const HybridTrace& trace) {
    std::vector<TraceColumn> cols;
    for (std::size_t i = 0; i < trace.state_names.size(); ++i) {
        cols.push_back({trace.state_names[i], [i](const TraceSample& s) { return s.x[i]; }});
    }
    write_trace_csv(os, trace, cols);
}

}  // namespace isc
