#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace isc {

/// Invalid or inconsistent configuration (bad preset, unknown key, violated
/// parameter invariant). Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A function was called outside its documented domain.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Numerical failure during integration. Carries the offending component
/// and, once known, the hybrid time at which it happened. Maps to CLI exit
/// code 3.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, std::size_t component, double t = 0.0,
                     std::int64_t j = 0)
        : std::runtime_error(what), component_(component), t_(t), j_(j) {}

    [[nodiscard]] std::size_t component() const noexcept { return component_; }
    [[nodiscard]] double t() const noexcept { return t_; }
    [[nodiscard]] std::int64_t j() const noexcept { return j_; }

private:
    std::size_t component_;
    double t_;
    std::int64_t j_;
};

}  // namespace isc
