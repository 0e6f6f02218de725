#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lattopt/driver.hpp"

using namespace lattopt;

namespace {

// Small but complete optimization setup: 6x6 cells, coarse mesh, short run.
OptimizationConfig toy_config(double p_in, int iterations) {
    OptimizationConfig c;
    c.phys.L_x = 6 * 2.5e-3;
    c.phys.L_y = 6 * 2.5e-3;
    c.phys.L_in = 2 * 2.5e-3;
    c.P_in = p_in;
    c.mesh_refinement = 2;
    c.symmetry = true;
    c.iterations = iterations;
    c.continuation.stage_length = std::max(1, iterations / 4);
    c.flow.nonlinear_tol = 1e-9;
    return c;
}

} // namespace

TEST_CASE("zero-iteration run returns the all-lattice initial design", "[driver]") {
    OptimizationConfig cfg = toy_config(10.0, 0);
    const Domain dom = build_domain(cfg.domain_spec());
    const auto table = cfg.load_table();
    const OptimizationResult r = run_optimization(cfg, table, dom);
    CHECK(r.history.empty());
    for (double g : r.design.gamma1) CHECK(g == 0.0);
    for (double g : r.design.gamma2) CHECK(g == 0.0);
}

TEST_CASE("short optimization run decreases the objective and stays in bounds", "[driver][slow]") {
    OptimizationConfig cfg = toy_config(10.0, 12);
    const Domain dom = build_domain(cfg.domain_spec());
    const auto table = cfg.load_table();
    const OptimizationResult r = run_optimization(cfg, table, dom);
    REQUIRE(static_cast<int>(r.history.size()) == 12);
    for (const auto& row : r.history) {
        CHECK(std::isfinite(row.K));
        CHECK(row.K > 0.0);
        CHECK(row.g <= 1e-12);  // f = 1 constraint can never activate
    }
    // the optimizer should make clear progress from the all-lattice start
    CHECK(r.history.back().K < r.history.front().K);
    for (double g : r.design.gamma1) {
        CHECK(g >= 0.0);
        CHECK(g <= 1.0);
    }
    // iterations carry the continuation stages in order
    CHECK(r.history.front().q_k == 1.0);
    CHECK(r.history.back().q_k == 50.0);
    CHECK(r.history.front().q_f == 50.0);
    CHECK(r.history.back().q_f == 1.0);
}

TEST_CASE("identical configs reproduce identical trajectories", "[driver][slow]") {
    OptimizationConfig cfg = toy_config(10.0, 6);
    const Domain dom = build_domain(cfg.domain_spec());
    const auto table = cfg.load_table();
    const OptimizationResult a = run_optimization(cfg, table, dom);
    const OptimizationResult b = run_optimization(cfg, table, dom);
    REQUIRE(a.history.size() == b.history.size());
    for (size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].K == b.history[i].K);
        CHECK(a.history[i].g == b.history[i].g);
        CHECK(a.history[i].Mnd == b.history[i].Mnd);
    }
    for (size_t c = 0; c < a.design.gamma1.size(); ++c) {
        CHECK(a.design.gamma1[c] == b.design.gamma1[c]);
        CHECK(a.design.gamma2[c] == b.design.gamma2[c]);
    }
}

TEST_CASE("checkpoint callback fires on schedule", "[driver][slow]") {
    OptimizationConfig cfg = toy_config(10.0, 6);
    cfg.checkpoint_every = 2;
    const Domain dom = build_domain(cfg.domain_spec());
    const auto table = cfg.load_table();
    int calls = 0;
    DriverCallbacks cb;
    cb.checkpoint = [&](int iter, const DesignField&) {
        ++calls;
        CHECK(iter % 2 == 0);
    };
    run_optimization(cfg, table, dom, cb);
    CHECK(calls == 3);
}

TEST_CASE("evaluate_design reports objective, inlet velocity and balance", "[driver]") {
    OptimizationConfig cfg = toy_config(10.0, 0);
    const Domain dom = build_domain(cfg.domain_spec());
    const auto table = cfg.load_table();
    const DesignField d = DesignField::constant(dom.grid.cell_count(), 1.0, 0.0);  // all void
    const Evaluation ev = evaluate_design(cfg, table, dom, d);
    CHECK(ev.u_in > 0.0);
    CHECK(ev.K > 0.0);
    CHECK(ev.energy_residual < 0.01);
}
