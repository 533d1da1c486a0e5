#include <catch_amalgamated.hpp>

#include <cmath>

#include "isc/analysis.hpp"

using namespace isc;
using Catch::Approx;

namespace {

double velocity_oracle(double rho) {
    const double x = 4.0 / 55.0 * (rho - 52.5);
    return 60.0 * 0.5 * (1.0 - std::tanh(0.5 * x)) + 5.0;
}

// With δ = 1 the travel times cancel, so ρ*(u) = 20 inverts in closed form:
// Q / (1 + e^{b u + γ}) = 20 v̄(20).
double static_u_for_reference() {
    const double out = 20.0 * velocity_oracle(20.0);
    return (std::log(2170.0 / out - 1.0) - 1.71781) / 0.335;
}

// Dynamic plant: q* = Q/2 − ã u and q* = 20 v̄(20).
double dynamic_u_for_reference() { return (1085.0 - 20.0 * velocity_oracle(20.0)) / 100.0; }

// Outflow is increasing below its peak (~44 veh/mi), so plain bisection works.
double outflow_inverse(double q) {
    double lo = 0.0, hi = 44.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mid * velocity_oracle(mid) < q ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

ResponseMapOptions quick(Interval u_box, std::size_t n) {
    ResponseMapOptions o;
    o.u_box = u_box;
    o.n_grid = n;
    o.with_oracle = false;
    return o;
}

}  // namespace

TEST_CASE("static equilibrium at the reference-seeking incentive") {
    const auto p = mnpass_static_params();
    const auto eq = solve_equilibrium_static(-5.746, p, {0.0, 50.0});
    REQUIRE(eq.status == EquilibriumStatus::ok);
    CHECK(eq.rho == Approx(20.0).margin(0.05));
    CHECK(eq.stable);
    CHECK(eq.root_count == 1);
    CHECK(std::abs(density_rhs(eq.rho, -5.746, p)) / (p.demand / p.length) <= 1e-8);

    const auto exact = solve_equilibrium_static(static_u_for_reference(), p, {0.0, 50.0});
    CHECK(exact.rho == Approx(20.0).margin(1e-8));
}

TEST_CASE("static equilibrium empties the lane for large tolls") {
    const auto p = mnpass_static_params();
    double prev = 50.0;
    for (double u : {10.0, 20.0, 40.0, 80.0}) {
        const auto eq = solve_equilibrium_static(u, p, {0.0, 50.0});
        REQUIRE(eq.status == EquilibriumStatus::ok);
        CHECK(eq.rho < prev);
        prev = eq.rho;
    }
    CHECK(prev < 1e-6);
}

TEST_CASE("static equilibrium reports boxes without a root") {
    const auto p = mnpass_static_params();
    // Inflow exceeds the peak outflow for strongly negative tolls.
    const auto eq = solve_equilibrium_static(-30.0, p, {0.0, 50.0});
    CHECK(eq.status == EquilibriumStatus::no_root);
    CHECK(eq.root_count == 0);
    CHECK(std::isnan(eq.rho));
    CHECK(solve_equilibrium_static(-30.0, p, {0.0, 160.0}).status == EquilibriumStatus::no_root);
}

TEST_CASE("static equilibrium reports the congested branch as a second root") {
    const auto p = mnpass_static_params();
    const auto wide = solve_equilibrium_static(-11.0, p, {0.0, 160.0});
    CHECK(wide.status == EquilibriumStatus::multiple_roots);
    CHECK(wide.root_count == 2);
    // The free-flow root is the one returned.
    CHECK(wide.stable);
    CHECK(wide.rho < 44.0);
    CHECK(wide.rho == Approx(solve_equilibrium_static(-11.0, p, {0.0, 44.0}).rho).margin(1e-9));
}

TEST_CASE("static equilibrium agrees with forward simulation") {
    const auto p = mnpass_static_params();
    for (double u : {-8.0, -5.746, 0.0, 15.0}) {
        const auto eq = solve_equilibrium_static(u, p, {0.0, 50.0});
        const double sim = settle_static(u, p, 35.0, 50.0, default_oracle_step(p));
        CHECK(sim == Approx(eq.rho).epsilon(1e-3));
    }
}

TEST_CASE("dynamic equilibrium inflow decouples in the interior") {
    const auto p = mnpass_dynamic_params();
    for (double u : {-5.0, -1.12, 0.0, 3.0}) {
        const auto eq = solve_equilibrium_dynamic(u, p, ThetaBox{{0.0, p.demand}, {0.0, 160.0}});
        REQUIRE(eq.status != EquilibriumStatus::no_root);
        REQUIRE(eq.status != EquilibriumStatus::not_converged);
        CHECK(eq.theta.q_el == Approx(p.demand / 2 - p.a_tilde * u).margin(1e-6));
        CHECK(eq.residual <= 1e-8);
    }
}

TEST_CASE("dynamic equilibrium near the reference density") {
    const auto p = mnpass_dynamic_params();
    const auto eq = solve_equilibrium_dynamic(-1.12, p, ThetaBox{{0.0, p.demand}, {0.0, 160.0}});
    CHECK(eq.theta.q_el == Approx(1197.0).margin(1.0));
    CHECK(eq.theta.rho == Approx(20.0).margin(0.1));
    CHECK(eq.stable);
    // The congested branch of v̄(ρ)ρ = q* also lies inside [0, 160].
    CHECK(eq.status == EquilibriumStatus::multiple_roots);
    CHECK(eq.root_count == 2);
}

TEST_CASE("dynamic equilibrium at zero incentive") {
    const auto p = mnpass_dynamic_params();
    const auto eq = solve_equilibrium_dynamic(0.0, p, ThetaBox{{0.0, p.demand}, {0.0, 50.0}});
    REQUIRE(eq.status == EquilibriumStatus::ok);
    CHECK(eq.theta.q_el == Approx(1085.0).margin(1e-6));
    CHECK(eq.theta.rho == Approx(outflow_inverse(1085.0)).margin(1e-6));
}

TEST_CASE("dynamic equilibrium with a saturated inflow and no density root") {
    const auto p = mnpass_dynamic_params();
    const auto eq = solve_equilibrium_dynamic(-20.0, p, ThetaBox{{0.0, p.demand}, {0.0, 160.0}});
    CHECK(eq.inflow_saturated);
    CHECK(eq.status == EquilibriumStatus::no_root);
}

TEST_CASE("static response map optimum") {
    const auto p = mnpass_static_params();
    const auto map = build_response_map(p, PlantVariant::static_inflow, quick({-10.0, 0.0}, 101));
    CHECK(map.u_star == Approx(-5.75).margin(0.05));
    CHECK(map.u_star == Approx(static_u_for_reference()).margin(1e-6));
    CHECK(map.phi_star <= 1e-4);
    CHECK(!map.poisoned());
}

TEST_CASE("dynamic response map optimum") {
    const auto p = mnpass_dynamic_params();
    auto opt = quick({-3.0, 1.0}, 41);
    opt.rho_box = {0.0, 160.0};
    opt.q_box = {0.0, p.demand};
    const auto map = build_response_map(p, PlantVariant::dynamic_behavior, opt);
    CHECK(map.u_star == Approx(-1.12).margin(0.05));
    CHECK(map.u_star == Approx(dynamic_u_for_reference()).margin(1e-5));
    REQUIRE(map.ell_names == std::vector<std::string>{"q_EL", "rho"});
}

TEST_CASE("static response map is non-increasing in the incentive") {
    const auto p = mnpass_static_params();
    const auto map = build_response_map(p, PlantVariant::static_inflow, quick({-40.0, 40.0}, 801));
    std::size_t checked = 0;
    for (std::size_t i = 1; i < map.points.size(); ++i) {
        const auto& a = map.points[i - 1];
        const auto& b = map.points[i];
        if (!a.valid() || !b.valid()) continue;
        ++checked;
        CHECK(b.ell[0] <= a.ell[0]);
    }
    CHECK(checked > 400);
}

TEST_CASE("reduced cost is the index at the equilibrium") {
    const auto p = mnpass_static_params();
    const auto opt = quick({-10.0, 10.0}, 21);
    const auto map = build_response_map(p, PlantVariant::static_inflow, opt);
    for (const auto& pt : map.points) {
        const auto eq = solve_equilibrium_static(pt.u, p, opt.rho_box);
        const double direct = (eq.rho - 20.0) * (eq.rho - 20.0);
        CHECK(std::abs(pt.phi_tilde - direct) <= 1e-12);
        CHECK(pt.residual <= 1e-8);
    }
}

TEST_CASE("optimum beats its grid neighbours") {
    const auto p = mnpass_static_params();
    const auto opt = quick({-40.0, 40.0}, 801);
    const auto map = build_response_map(p, PlantVariant::static_inflow, opt);
    const double du = 0.1;
    CHECK(reduced_cost(map.u_star + du, PlantVariant::static_inflow, p, opt) >= map.phi_star);
    CHECK(reduced_cost(map.u_star - du, PlantVariant::static_inflow, p, opt) >= map.phi_star);
}

TEST_CASE("response map forward oracle on a well-posed window") {
    const auto p = mnpass_static_params();
    auto opt = quick({-8.0, 8.0}, 17);
    opt.with_oracle = true;
    const auto map = build_response_map(p, PlantVariant::static_inflow, opt);
    const auto r = viability_report(map);
    CHECK(r.a1_unique_stable);
    CHECK(r.max_oracle_gap <= 1e-3);
    CHECK(r.n_basin_failures == 0);
}

TEST_CASE("viability flags the region without equilibria") {
    const auto p = mnpass_static_params();
    auto opt = quick({-20.0, 0.0}, 21);
    opt.with_oracle = true;
    const auto map = build_response_map(p, PlantVariant::static_inflow, opt);
    const auto r = viability_report(map);
    CHECK(map.poisoned());
    CHECK(r.poisoned);
    CHECK(!r.a1_unique_stable);
    CHECK(!r.all_positive());
    CHECK(r.n_invalid > 0);
    CHECK(r.valid_u_range.lo > -12.0);
}

TEST_CASE("non-convex map is detected") {
    ResponseMap map;
    map.u_box = {0.0, 6.0};
    for (int i = 0; i <= 60; ++i) {
        ResponsePoint pt;
        pt.u = 0.1 * i;
        pt.phi_tilde = std::sin(pt.u);
        pt.status = EquilibriumStatus::ok;
        pt.unique_equilibrium = pt.stable = pt.basin_ok = true;
        pt.oracle_gap = 0.0;
        map.points.push_back(pt);
    }
    map.oracle_checked = true;
    compute_curvature(map);
    const auto r = viability_report(map);
    CHECK(r.a1_unique_stable);
    CHECK(!r.a2_strictly_convex);
    CHECK(!r.a3_strongly_convex);
    CHECK(r.kappa_est == 0.0);
    CHECK(r.lipschitz_est == Approx(1.0).margin(0.01));
}

TEST_CASE("convex toy map gets its curvature") {
    ResponseMap map;
    map.u_box = {-1.0, 1.0};
    for (int i = 0; i <= 20; ++i) {
        ResponsePoint pt;
        pt.u = -1.0 + 0.1 * i;
        pt.phi_tilde = 3.0 * pt.u * pt.u;
        pt.status = EquilibriumStatus::ok;
        pt.unique_equilibrium = pt.stable = pt.basin_ok = true;
        pt.oracle_gap = 0.0;
        map.points.push_back(pt);
    }
    map.oracle_checked = true;
    compute_curvature(map);
    const auto r = viability_report(map);
    CHECK(r.all_positive());
    CHECK(r.kappa_est == Approx(6.0).epsilon(1e-9));
    CHECK(r.curvature_at_optimum == Approx(6.0).epsilon(1e-9));
    // Unit box: u spans 2, φ̃ spans 3.
    CHECK(r.kappa_normalized == Approx(6.0 * 4.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("golden section") {
    CHECK(golden_section_min([](double x) { return (x - 0.3) * (x - 0.3); }, -1.0, 2.0) ==
          Approx(0.3).margin(1e-8));
    CHECK(golden_section_min([](double x) { return std::cosh(x + 1.5); }, -4.0, 4.0) == Approx(-1.5).margin(1e-8));
}

TEST_CASE("period-averaged GISC update is exact on quadratics") {
    ControllerGains g;
    DitherConfig d;
    d.eps_a = 0.3;
    const auto f = [](double u) { return (u - 1.0) * (u - 1.0); };
    for (double u : {-2.0, 0.0, 2.5}) {
        CHECK(period_averaged_gisc_update(u, f, g, d) == Approx(-2.0 * (u - 1.0)).margin(1e-9));
    }
}

TEST_CASE("period-averaged GISC update on a cubic carries a dither-squared bias") {
    // Mean of cos⁴ over a period is 3/8, so the average update is
    // −k(3û² + (3/4)ε_a²).
    ControllerGains g;
    g.k = 2.0;
    DitherConfig d;
    const auto f = [](double u) { return u * u * u; };
    for (double a : {0.1, 0.05}) {
        d.eps_a = a;
        CHECK(period_averaged_gisc_update(0.7, f, g, d) == Approx(-2.0 * (3 * 0.49 + 0.75 * a * a)).epsilon(1e-8));
    }
}

TEST_CASE("equilibrium status names") {
    CHECK(std::string(to_string(EquilibriumStatus::ok)) == "ok");
    CHECK(std::string(to_string(EquilibriumStatus::no_root)) == "no_root");
    CHECK(std::string(to_string(EquilibriumStatus::multiple_roots)) == "multiple_roots");
    CHECK(std::string(to_string(EquilibriumStatus::not_converged)) == "not_converged");
}

TEST_CASE("response map rejects degenerate grids") {
    const auto p = mnpass_static_params();
    CHECK_THROWS_AS(build_response_map(p, PlantVariant::static_inflow, quick({-1.0, 1.0}, 2)), ConfigError);
    CHECK_THROWS_AS(build_response_map(p, PlantVariant::static_inflow, quick({1.0, 1.0}, 5)), ConfigError);
}
