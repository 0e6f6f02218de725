#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lattopt/flow.hpp"
#include "lattopt/grid.hpp"
#include "lattopt/metrics.hpp"
#include "lattopt/thermal.hpp"

using namespace lattopt;

namespace {

Domain channel_domain(double p_in, int refinement = 2) {
    DomainSpec s;
    s.L_x = 0.05;
    s.L_y = 0.05;
    s.L_in = 0.05;
    s.cell_size = 2.5e-3;
    s.refinement = refinement;
    s.symmetry = false;
    s.plenum_cells = 0;
    s.P_in = p_in;
    return build_domain(s);
}

std::vector<double> constant_field(const Domain& dom, double v) {
    return std::vector<double>(static_cast<size_t>(dom.mesh.cell_count()), v);
}

FlowState solve_channel_flow(const Domain& dom, const PhysicalParams& phys, double alpha, double beta) {
    FlowSolver solver(dom, phys);
    solver.set_drag_fields(constant_field(dom, alpha), constant_field(dom, beta));
    return solver.solve();
}

} // namespace

TEST_CASE("unheated problem stays at the inlet temperature", "[thermal]") {
    PhysicalParams phys;
    phys.q_s = 0.0;
    Domain dom = channel_domain(1.0);
    const FlowState f = solve_channel_flow(dom, phys, phys.alpha_fluid(), 0.0);
    ThermalSolver solver(dom, phys);
    const auto htc = heat_transfer_coefficients(phys.k_f, phys);
    const ThermalState t = solver.solve(f, constant_field(dom, phys.k_f), constant_field(dom, htc.h));
    for (double v : t.T0) CHECK(v == Catch::Approx(phys.T_in).margin(1e-9));
    for (double v : t.Tb0) CHECK(v == Catch::Approx(phys.T_in).margin(1e-9));
}

TEST_CASE("1D strip energy balance at the outlet", "[thermal]") {
    PhysicalParams phys;
    Domain dom = channel_domain(1.0);
    const FlowState f = solve_channel_flow(dom, phys, phys.alpha_fluid(), 0.0);
    const double vbar = inlet_mean_velocity(f, dom);
    ThermalSolver solver(dom, phys);
    const auto htc = heat_transfer_coefficients(phys.k_f, phys);
    const ThermalState t = solver.solve(f, constant_field(dom, phys.k_f), constant_field(dom, htc.h));

    // bulk outlet temperature (uniform flow -> plain average of the last column)
    const StructuredMesh& m = dom.mesh;
    double t_out = 0.0;
    for (int j = 0; j < m.ny; ++j) t_out += t.T0[static_cast<size_t>(m.cell(m.nx - 1, j))];
    t_out /= m.ny;
    const double rise = phys.q_s * 0.05 / (phys.rho_f * phys.c_pf * 2.0 * phys.H_t * vbar);
    CHECK(std::abs((t_out - phys.T_in) - rise) / rise < 0.01);
}

TEST_CASE("temperature rise is linear in the heat flux", "[thermal]") {
    PhysicalParams phys;
    Domain dom = channel_domain(1.0);
    const FlowState f = solve_channel_flow(dom, phys, phys.alpha_fluid(), 0.0);
    const auto htc = heat_transfer_coefficients(phys.k_f, phys);

    ThermalSolver s1(dom, phys);
    const ThermalState t1 = s1.solve(f, constant_field(dom, phys.k_f), constant_field(dom, htc.h));
    PhysicalParams phys2 = phys;
    phys2.q_s = 2.0 * phys.q_s;
    ThermalSolver s2(dom, phys2);
    const ThermalState t2 = s2.solve(f, constant_field(dom, phys.k_f), constant_field(dom, htc.h));

    for (int e = 0; e < dom.mesh.cell_count(); e += 13) {
        const double d1 = t1.T0[static_cast<size_t>(e)] - phys.T_in;
        const double d2 = t2.T0[static_cast<size_t>(e)] - phys.T_in;
        CHECK(d2 == Catch::Approx(2.0 * d1).epsilon(1e-9));
        const double b1 = t1.Tb0[static_cast<size_t>(e)] - phys.T_in;
        const double b2 = t2.Tb0[static_cast<size_t>(e)] - phys.T_in;
        CHECK(b2 == Catch::Approx(2.0 * b1).epsilon(1e-9));
    }
}

TEST_CASE("energy balance residual on converged and degenerate runs", "[thermal]") {
    PhysicalParams phys;
    Domain dom = channel_domain(10.0);
    const FlowState f = solve_channel_flow(dom, phys, 30756.0, 225360.0);
    ThermalSolver solver(dom, phys);
    const auto htc = heat_transfer_coefficients(5.0, phys);
    const ThermalState t = solver.solve(f, constant_field(dom, 5.0), constant_field(dom, htc.h));
    CHECK(energy_balance_residual(f, t, dom, phys, solver.heat_source()) < 0.01);

    SECTION("q_s = 0 guards the division") {
        std::vector<double> no_heat(static_cast<size_t>(dom.mesh.cell_count()), 0.0);
        CHECK(energy_balance_residual(f, t, dom, phys, no_heat) == 0.0);
    }

    SECTION("an unconverged flow still yields a finite report") {
        FlowSolver rough(dom, phys);
        FlowSolveSettings set;
        set.max_picard_iters = 1;
        set.use_newton = false;
        set.nonlinear_tol = 1e300;  // accept the first iterate
        rough.set_settings(set);
        rough.set_drag_fields(constant_field(dom, 30756.0), constant_field(dom, 225360.0));
        const FlowState f1 = rough.solve();
        ThermalSolver ts(dom, phys);
        const ThermalState t1 = ts.solve(f1, constant_field(dom, 5.0), constant_field(dom, htc.h));
        const double r = energy_balance_residual(f1, t1, dom, phys, ts.heat_source());
        CHECK(std::isfinite(r));
    }
}

TEST_CASE("discrete maximum principle and layer ordering", "[thermal]") {
    PhysicalParams phys;
    DomainSpec spec = DomainSpec::from(phys);
    spec.cell_size = 2.5e-3;
    spec.refinement = 2;
    spec.symmetry = true;
    spec.plenum_cells = 1;
    spec.P_in = 10.0;
    Domain dom = build_domain(spec);

    std::mt19937 rng(17);
    std::uniform_real_distribution<double> ar(500, 3e4), kr(0.598, 25.0);
    std::vector<double> alpha(static_cast<size_t>(dom.mesh.cell_count())),
        k(static_cast<size_t>(dom.mesh.cell_count())), h(static_cast<size_t>(dom.mesh.cell_count()));
    for (size_t e = 0; e < alpha.size(); ++e) {
        alpha[e] = ar(rng);
        k[e] = kr(rng);
        h[e] = heat_transfer_coefficients(k[e], phys).h;
    }
    FlowSolver fs(dom, phys);
    fs.set_drag_fields(alpha, std::vector<double>(alpha.size(), 1e5));
    const FlowState f = fs.solve();
    ThermalSolver ts(dom, phys);
    const ThermalState t = ts.solve(f, k, h);

    double t0_min = 1e300;
    for (double v : t.T0) t0_min = std::min(t0_min, v);
    CHECK(t0_min >= phys.T_in - 1e-9);
    // the minimum sits on the inlet column
    double inlet_min = 1e300;
    for (int j = dom.bc.inlet_j0; j < dom.bc.inlet_j1; ++j)
        inlet_min = std::min(inlet_min, t.T0[static_cast<size_t>(dom.mesh.cell(0, j))]);
    CHECK(inlet_min == Catch::Approx(t0_min).margin(1e-6));

    for (int e = 0; e < dom.mesh.cell_count(); ++e)
        if (dom.is_design_element(e))
            CHECK(t.Tb0[static_cast<size_t>(e)] >= t.T0[static_cast<size_t>(e)] - 1e-9);
}

TEST_CASE("zero coupling makes the base plate singular", "[thermal]") {
    PhysicalParams phys;
    Domain dom = channel_domain(1.0);
    const FlowState f = solve_channel_flow(dom, phys, phys.alpha_fluid(), 0.0);
    ThermalSolver solver(dom, phys);
    std::vector<double> h0(static_cast<size_t>(dom.mesh.cell_count()), 0.0);
    CHECK_THROWS(solver.solve(f, constant_field(dom, phys.k_f), h0));
}

TEST_CASE("profile identities of the layer reduction", "[thermal]") {
    const double H = 2.5e-3;
    CHECK(std::abs(temperature_defect_profile(-H, H)) < 1e-12);
    CHECK(temperature_defect_profile(0.0, H) == Catch::Approx(455.0 / 416.0).epsilon(1e-14));

    // bulk-weighted mean of the profile equals one (Simpson quadrature)
    const int n = 2000;
    double acc = 0.0;
    const double dz = 2.0 * H / n;
    for (int i = 0; i <= n; ++i) {
        const double z = -H + i * dz;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * velocity_profile_factor(z, H) * temperature_defect_profile(z, H);
    }
    acc *= dz / 3.0 / (2.0 * H);
    CHECK(std::abs(acc - 1.0) < 1e-12);
}
