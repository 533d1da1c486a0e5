#pragma once

namespace isc {

/// Reference-seeking index φ_ref = (ρ − ρ_ref)².
inline double performance_index(double rho, double rho_ref) {
    const double d = rho - rho_ref;
    return d * d;
}

}  // namespace isc
