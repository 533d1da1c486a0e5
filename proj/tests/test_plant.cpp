#include <catch_amalgamated.hpp>

#include <cmath>

#include "isc/plant.hpp"

using namespace isc;
using Catch::Approx;

namespace {

// Logistic written through tanh: 1/(1+e^x) = (1 − tanh(x/2))/2.
double velocity_oracle(double rho) {
    const double x = 4.0 / 55.0 * (rho - 52.5);
    return 60.0 * 0.5 * (1.0 - std::tanh(0.5 * x)) + 5.0;
}

}  // namespace

TEST_CASE("mean velocity at the midpoint density is halfway between jam and free speed") {
    CHECK(mean_velocity(52.5, mnpass_static_params()) == Approx(35.0).margin(1e-12));
}

TEST_CASE("mean velocity matches the tanh form of the mollified profile") {
    const auto p = mnpass_static_params();
    CHECK(mean_velocity(0.0, p) == Approx(63.71).margin(0.01));
    CHECK(mean_velocity(20.0, p) == Approx(59.85).margin(0.01));
    for (double rho : {0.0, 7.5, 20.0, 44.0, 80.0, 160.0}) {
        CHECK(mean_velocity(rho, p) == Approx(velocity_oracle(rho)).epsilon(1e-12));
    }
}

TEST_CASE("static inflow at zero toll with equal travel times") {
    const auto p = mnpass_static_params();
    const double oracle = 2170.0 / (1.0 + std::exp(1.71781));
    CHECK(static_inflow(20.0, 0.0, p) == Approx(oracle).epsilon(1e-12));
    CHECK(static_inflow(20.0, 0.0, p) == Approx(330.2).margin(0.5));
}

TEST_CASE("static inflow is Q/2 when the marginal cost vanishes") {
    const auto p = mnpass_static_params();
    // δ = 1: marginal cost = b·u + γ_EL.
    const double u0 = -p.gamma_el / p.b;
    CHECK(static_inflow(12.0, u0, p) == Approx(1085.0).epsilon(1e-12));
}

TEST_CASE("static inflow saturates to zero for large tolls") {
    const auto p = mnpass_static_params();
    CHECK(static_inflow(20.0, 1e4, p) < 1e-9);
    CHECK(static_inflow(20.0, -1e4, p) == Approx(p.demand));
}

TEST_CASE("density rhs near the reference density at u = -5.746") {
    const auto p = mnpass_static_params();
    CHECK(std::abs(density_rhs(20.0, -5.746, p)) < 1.0);
    // Empty lane fills.
    CHECK(density_rhs(0.0, 3.0, p) == Approx(p.k_rho / p.length * static_inflow(0.0, 3.0, p)));
}

TEST_CASE("GP travel-time factor enters the marginal cost") {
    auto p = mnpass_static_params();
    p.delta = 1.5;
    const double tt = p.length / mean_velocity(20.0, p);
    CHECK(static_marginal_cost(20.0, 1.0, p) == Approx(p.b + p.gamma_el - 0.5 * p.a * tt));
}

TEST_CASE("behavior rhs vanishes on the affine equilibrium") {
    const auto p = mnpass_dynamic_params();
    for (double u : {-5.0, -1.12, 0.0, 3.0}) {
        CHECK(behavior_rhs(p.demand / 2 - p.a_tilde * u, u, p) == Approx(0.0).margin(1e-9));
    }
    CHECK(behavior_rhs(p.demand / 2, 0.0, p) == 0.0);
}

TEST_CASE("behavior rhs is projected at the box faces") {
    const auto p = mnpass_dynamic_params();
    CHECK(behavior_rhs(0.0, 20.0, p) == 0.0);            // raw value −915
    CHECK(behavior_rhs(0.0, 5.0, p) == Approx(585.0));   // −(−1085 + 500) points inward
    CHECK(behavior_rhs(p.demand, -20.0, p) == 0.0);
    CHECK(behavior_rhs(p.demand, 20.0, p) == Approx(-(1085.0 + 2000.0)));
}

TEST_CASE("behavior rhs rejects inflows outside [0, Q]") {
    const auto p = mnpass_dynamic_params();
    CHECK_THROWS_AS(behavior_rhs(-1.0, 0.0, p), ContractViolation);
    CHECK_THROWS_AS(behavior_rhs(p.demand + 1.0, 0.0, p), ContractViolation);
}

TEST_CASE("full rhs scales both components by 1/eps0") {
    auto p = mnpass_dynamic_params();
    const PlantState th{900.0, 30.0};
    const auto d = full_rhs(th, 0.5, p);
    CHECK(d[0] == Approx(p.k_m * behavior_rhs(900.0, 0.5, p) / 0.1));
    CHECK(d[1] == Approx((900.0 - mean_velocity(30.0, p) * 30.0) / p.length / 0.1));
    p.eps0 = 1.0;
    const auto e = full_rhs(th, 0.5, p);
    CHECK(e[0] == Approx(behavior_rhs(900.0, 0.5, p)));
    CHECK(e[1] == Approx((900.0 - velocity_oracle(30.0) * 30.0) / 0.7));
}

TEST_CASE("parameter invariants are enforced") {
    auto p = mnpass_static_params();
    p.v_free = 4.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = mnpass_static_params();
    p.delta = 0.9;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = mnpass_static_params();
    p.eps0 = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    CHECK_NOTHROW(mnpass_dynamic_params().validate());
}

TEST_CASE("plant variant names round-trip") {
    CHECK(parse_plant_variant(to_string(PlantVariant::static_inflow)) == PlantVariant::static_inflow);
    CHECK(parse_plant_variant(to_string(PlantVariant::dynamic_behavior)) == PlantVariant::dynamic_behavior);
    CHECK_THROWS_AS(parse_plant_variant("steady"), ConfigError);
}
