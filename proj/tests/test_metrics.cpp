#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lattopt/metrics.hpp"

using namespace lattopt;

namespace {
Domain small_domain() {
    PhysicalParams phys;
    DomainSpec s = DomainSpec::from(phys);
    s.cell_size = 2.5e-3;
    s.refinement = 2;
    s.symmetry = false;
    return build_domain(s);
}
} // namespace

TEST_CASE("Nusselt arithmetic on a prescribed field", "[metrics]") {
    PhysicalParams phys;
    Domain dom = small_domain();
    ThermalState t;
    t.T0.assign(static_cast<size_t>(dom.mesh.cell_count()), phys.T_in);
    t.Tb0.assign(static_cast<size_t>(dom.mesh.cell_count()), phys.T_in + 120.0);
    // peak rise of 120 K: Nu_max = q/(dT) * L_in/k_f
    const auto n = nusselt_metrics(t, phys, dom, 10.0, /*with_bottom_offset=*/false);
    CHECK(n.Nu_max == Catch::Approx(1e5 / 120.0 * 5e-3 / 0.598).epsilon(1e-12));
    CHECK(n.Nu_max == Catch::Approx(6.97).epsilon(2e-3));
    // constant field: all three agree
    CHECK(n.Nu_obj == Catch::Approx(n.Nu_max).epsilon(1e-12));
    CHECK(n.Nu_ave == Catch::Approx(n.Nu_max).epsilon(1e-12));
}

TEST_CASE("Nusselt ordering on a varying field", "[metrics]") {
    PhysicalParams phys;
    Domain dom = small_domain();
    ThermalState t;
    t.T0.assign(static_cast<size_t>(dom.mesh.cell_count()), phys.T_in);
    t.Tb0.assign(static_cast<size_t>(dom.mesh.cell_count()), phys.T_in);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> dist(5.0, 80.0);
    for (int e = 0; e < dom.mesh.cell_count(); ++e)
        t.Tb0[static_cast<size_t>(e)] = phys.T_in + dist(rng);
    const auto n = nusselt_metrics(t, phys, dom, 10.0, true);
    CHECK(n.Nu_ave >= n.Nu_obj);
    CHECK(n.Nu_obj >= n.Nu_max);
    // the bottom-surface offset lowers every Nu
    const auto n0 = nusselt_metrics(t, phys, dom, 10.0, false);
    CHECK(n.Nu_max < n0.Nu_max);
}

TEST_CASE("Mnd of binary, mixed and inverted fields", "[metrics]") {
    CHECK(mnd({0.0, 1.0, 0.0, 1.0}) == 0.0);
    CHECK(mnd({0.5, 0.5}) == Catch::Approx(100.0));
    std::vector<double> g = {0.1, 0.4, 0.9, 0.3};
    std::vector<double> ginv = g;
    for (double& v : ginv) v = 1.0 - v;
    CHECK(mnd(g) == Catch::Approx(mnd(ginv)).epsilon(1e-14));
    CHECK_THROWS_AS(mnd({}), std::invalid_argument);
}

TEST_CASE("centre-plane correction fields", "[metrics]") {
    PhysicalParams phys;
    Domain dom = small_domain();
    const int ne = dom.mesh.cell_count();
    FlowState f = FlowState::zeros(dom.mesh);
    for (double& v : f.u) v = 0.02;
    ThermalState t;
    t.T0.assign(static_cast<size_t>(ne), 300.0);
    t.Tb0.assign(static_cast<size_t>(ne), 330.0 + phys.q_s * phys.H_b / phys.k_s);
    std::vector<double> q(static_cast<size_t>(ne), phys.q_s);  // T_w = 330 K everywhere

    const auto cp = center_plane_fields(f, t, dom, phys, q);
    for (int e = 0; e < ne; e += 29) {
        CHECK(cp.V0x[static_cast<size_t>(e)] == Catch::Approx(0.03).epsilon(1e-12));
        // (455*300 - 39*330)/416
        CHECK(cp.T_center[static_cast<size_t>(e)] == Catch::Approx(297.1875).epsilon(1e-12));
    }

    SECTION("affine coefficients sum to one: T_w = T0 leaves T unchanged") {
        ThermalState t2;
        t2.T0.assign(static_cast<size_t>(ne), 313.7);
        t2.Tb0.assign(static_cast<size_t>(ne), 313.7);
        std::vector<double> q0(static_cast<size_t>(ne), 0.0);
        const auto cp2 = center_plane_fields(f, t2, dom, phys, q0);
        for (int e = 0; e < ne; e += 31)
            CHECK(cp2.T_center[static_cast<size_t>(e)] == Catch::Approx(313.7).epsilon(1e-13));
    }
}

TEST_CASE("solid fraction of simple designs", "[metrics]") {
    Domain dom = small_domain();
    const auto table = default_property_table();
    ProjectionParams proj;
    const int nc = dom.grid.cell_count();

    SECTION("all void is empty") {
        DesignField d = DesignField::constant(nc, 1.0, 0.3);
        CHECK(solid_fraction(d, table, dom, proj) == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("uniform lattice matches the porosity complement") {
        DesignField d = DesignField::constant(nc, 0.0, 0.6);
        CHECK(solid_fraction(d, table, dom, proj) == Catch::Approx(1.0 - table.eps(0.6)).epsilon(1e-12));
    }
    SECTION("mixed design equals the brute-force sum") {
        std::mt19937 rng(8);
        std::uniform_real_distribution<double> dist(0, 1);
        DesignField d = DesignField::constant(nc, 0.0, 0.0);
        for (int c = 0; c < nc; ++c) {
            d.gamma1[static_cast<size_t>(c)] = dist(rng) < 0.5 ? 0.0 : 1.0;
            d.gamma2[static_cast<size_t>(c)] = dist(rng);
        }
        double want = 0.0;
        for (int c = 0; c < nc; ++c) {
            const double g1h = heaviside_project(d.gamma1[static_cast<size_t>(c)], proj).first;
            want += (1.0 - table.eps(d.gamma2[static_cast<size_t>(c)])) * (1.0 - g1h);
        }
        want /= nc;
        CHECK(solid_fraction(d, table, dom, proj) == Catch::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("Pearson correlation", "[metrics]") {
    SECTION("perfectly linear") {
        std::vector<std::pair<double, double>> p;
        for (int i = 0; i < 6; ++i) p.emplace_back(i, 3.0 * i + 1.0);
        CHECK(pearson_correlation(p) == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("anti-linear") {
        std::vector<std::pair<double, double>> p;
        for (int i = 0; i < 6; ++i) p.emplace_back(i, -2.0 * i + 4.0);
        CHECK(pearson_correlation(p) == Catch::Approx(-1.0).epsilon(1e-12));
    }
    SECTION("fixed five-point set matches the textbook formula") {
        const std::vector<std::pair<double, double>> p = {{1, 2}, {2, 5}, {3, 4}, {4, 8}, {5, 7}};
        // hand computation: means 3 and 5.2; Sxy = 13, Sxx = 10, Syy = 22.8
        const double want = 13.0 / std::sqrt(10.0 * 22.8);
        CHECK(pearson_correlation(p) == Catch::Approx(want).epsilon(1e-12));
    }
    SECTION("degenerate input throws") {
        CHECK_THROWS_AS(pearson_correlation({{1, 1}, {1, 2}, {1, 3}}), std::invalid_argument);
        CHECK_THROWS_AS(pearson_correlation({{1, 1}, {2, 2}}), std::invalid_argument);
    }
}
