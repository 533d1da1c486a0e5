#pragma once

// Sinusoidal exploration signals generated by oscillators on the m-torus,
// plus the modulation and demodulation maps shared by all controllers.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isc/errors.hpp"

namespace isc {

/// Exact positive-or-negative rational, kept in lowest terms with den > 0.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
        if (den == 0) throw ConfigError("rational with zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    [[nodiscard]] double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    [[nodiscard]] std::string str() const {
        return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
    }
    friend bool operator==(const Rational&, const Rational&) = default;

    /// Accepts "p/q", integers and finite decimals such as "1.5".
    static Rational parse(std::string_view s) {
        auto bad = [&] { return ConfigError("cannot parse frequency '" + std::string(s) + "' as a rational"); };
        auto parse_int = [&](std::string_view t) -> std::int64_t {
            if (t.empty()) throw bad();
            std::size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
            if (i == t.size()) throw bad();
            std::int64_t v = 0;
            for (; i < t.size(); ++i) {
                if (t[i] < '0' || t[i] > '9') throw bad();
                if (v > (INT64_MAX - 9) / 10) throw bad();
                v = v * 10 + (t[i] - '0');
            }
            return t[0] == '-' ? -v : v;
        };
        if (const auto slash = s.find('/'); slash != std::string_view::npos) {
            const auto d = parse_int(s.substr(slash + 1));
            if (d == 0) throw bad();
            return {parse_int(s.substr(0, slash)), d};
        }
        if (const auto dot = s.find('.'); dot != std::string_view::npos) {
            const auto frac = s.substr(dot + 1);
            if (frac.size() > 15) throw bad();
            std::int64_t scale = 1;
            for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
            const std::string_view whole = s.substr(0, dot);
            const bool neg = !whole.empty() && whole[0] == '-';
            const std::int64_t w = (whole.empty() || whole == "-" || whole == "+") ? 0 : parse_int(whole);
            const std::int64_t f = frac.empty() ? 0 : parse_int(frac);
            const std::int64_t mag = (w < 0 ? -w : w) * scale + f;
            return {neg ? -mag : mag, scale};
        }
        return {parse_int(s), 1};
    }
};

struct DitherConfig {
    std::vector<Rational> omega{Rational{1}};
    double eps_p = 0.01;
    double eps_a = 0.1;

    [[nodiscard]] std::size_t m() const { return omega.size(); }
};

struct FrequencyViolation {
    enum class Clause { non_positive, repeated, doubled };
    std::size_t i = 0;
    std::size_t j = 0;
    Clause clause = Clause::non_positive;
    std::string message;
};

struct FrequencyReport {
    std::vector<FrequencyViolation> violations;

    [[nodiscard]] bool ok() const { return violations.empty(); }
    [[nodiscard]] std::string describe() const {
        std::string out;
        for (const auto& v : violations) out += (out.empty() ? "" : "; ") + v.message;
        return out.empty() ? "ok" : out;
    }
};

/// Checks ω_i > 0, ω_i ≠ ω_j and ω_i ≠ 2ω_j for all i ≠ j, exactly.
inline FrequencyReport validate_frequencies(std::span<const Rational> omega) {
    FrequencyReport report;
    auto name = [](std::size_t i) { return "omega" + std::to_string(i + 1); };
    for (std::size_t i = 0; i < omega.size(); ++i) {
        if (omega[i].num <= 0) {
            report.violations.push_back({i, i, FrequencyViolation::Clause::non_positive,
                                         name(i) + " = " + omega[i].str() + " is not positive"});
        }
    }
    // Cross-multiplied in 128 bits so the comparison stays exact.
    auto scaled_equal = [](const Rational& x, const Rational& y, std::int64_t factor) {
        return static_cast<__int128>(x.num) * y.den == static_cast<__int128>(factor) * y.num * x.den;
    };
    for (std::size_t i = 0; i < omega.size(); ++i) {
        for (std::size_t j = 0; j < omega.size(); ++j) {
            if (i == j) continue;
            if (i < j && scaled_equal(omega[i], omega[j], 1)) {
                report.violations.push_back({i, j, FrequencyViolation::Clause::repeated,
                                             name(i) + " = " + name(j) + " (repeated frequency " +
                                                 omega[i].str() + ")"});
            }
            if (scaled_equal(omega[i], omega[j], 2)) {
                report.violations.push_back({i, j, FrequencyViolation::Clause::doubled,
                                             name(i) + " = 2*" + name(j) + " (" + omega[i].str() + " = 2*" +
                                                 omega[j].str() + ")"});
            }
        }
    }
    return report;
}

/// μ̇ = (1/ε_p) R μ with blocks 2π[[0, ω_i], [−ω_i, 0]].
inline void oscillator_rhs(std::span<const double> mu, const DitherConfig& cfg, std::span<double> dmu) {
    const double scale = 2.0 * std::numbers::pi / cfg.eps_p;
    for (std::size_t i = 0; i < cfg.m(); ++i) {
        const double w = scale * cfg.omega[i].value();
        dmu[2 * i] = w * mu[2 * i + 1];
        dmu[2 * i + 1] = -w * mu[2 * i];
    }
}

/// u = û + ε_a·𝔻μ, where 𝔻μ picks the odd (1-based) components of μ.
inline void compose_input(std::span<const double> u_hat, std::span<const double> mu, const DitherConfig& cfg,
                          std::span<double> u) {
    if (u_hat.size() != cfg.m() || mu.size() != 2 * cfg.m() || u.size() != cfg.m()) {
        throw ContractViolation("compose_input: dimension mismatch");
    }
    for (std::size_t i = 0; i < cfg.m(); ++i) u[i] = u_hat[i] + cfg.eps_a * mu[2 * i];
}

inline std::vector<double> compose_input(std::span<const double> u_hat, std::span<const double> mu,
                                         const DitherConfig& cfg) {
    std::vector<double> u(cfg.m());
    compose_input(u_hat, mu, cfg, u);
    return u;
}

/// M(μ) = (2/ε_a)·𝔻μ.
inline void demodulation_gain(std::span<const double> mu, const DitherConfig& cfg, std::span<double> gain) {
    if (cfg.eps_a == 0.0) throw ConfigError("demodulation gain undefined for dither amplitude eps_a = 0");
    for (std::size_t i = 0; i < cfg.m(); ++i) gain[i] = 2.0 / cfg.eps_a * mu[2 * i];
}

inline std::vector<double> demodulation_gain(std::span<const double> mu, const DitherConfig& cfg) {
    std::vector<double> gain(cfg.m());
    demodulation_gain(mu, cfg, gain);
    return gain;
}

/// μ(0) = (1, 0) for every pair.
inline std::vector<double> initial_dither_phase(std::size_t m) {
    std::vector<double> mu(2 * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) mu[2 * i] = 1.0;
    return mu;
}

/// Closed-form solution of the oscillator: each pair rotates clockwise at
/// angular rate 2πω_i/ε_p. Reference for the integrated oscillator.
inline std::vector<double> analytic_dither(double t, std::span<const double> mu0, const DitherConfig& cfg) {
    std::vector<double> mu(mu0.size());
    for (std::size_t i = 0; i < cfg.m(); ++i) {
        const double angle = 2.0 * std::numbers::pi * cfg.omega[i].value() * t / cfg.eps_p;
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        mu[2 * i] = c * mu0[2 * i] + s * mu0[2 * i + 1];
        mu[2 * i + 1] = -s * mu0[2 * i] + c * mu0[2 * i + 1];
    }
    return mu;
}

}  // namespace isc
