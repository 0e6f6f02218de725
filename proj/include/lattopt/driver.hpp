#pragma once

// The optimization driver: per iteration project -> interpolate -> flow ->
// thermal -> objective/adjoint -> cell reduction -> MMA update, with the
// continuation schedule switching the RAMP convexity parameters between
// stages.

#include <chrono>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lattopt/adjoint.hpp"
#include "lattopt/config.hpp"
#include "lattopt/flow.hpp"
#include "lattopt/grid.hpp"
#include "lattopt/metrics.hpp"
#include "lattopt/mma.hpp"
#include "lattopt/properties.hpp"
#include "lattopt/thermal.hpp"

namespace lattopt {

struct RunRecordRow {
    int iter = 0;
    double K = 0.0;
    double g = 0.0;
    double Mnd = 0.0;
    double q_k = 0.0;
    double q_f = 0.0;
    double seconds = 0.0;  ///< wall time of the iteration
};

struct OptimizationResult {
    DesignField design;
    std::vector<RunRecordRow> history;
    FlowState flow;       ///< forward states of the last evaluated iterate
    ThermalState thermal;
    bool has_states = false;
};

struct DriverCallbacks {
    std::function<void(int, const DesignField&)> checkpoint;                  ///< called every checkpoint_every iters
    std::function<void(const DesignField&, const std::string&)> failure_dump; ///< called before aborting
};

/// Full optimization run. The initial design is all-lattice at the thinnest
/// beams (gamma1 = gamma2 = 0). A failed forward solve is retried once with
/// halved under-relaxation before aborting.
inline OptimizationResult run_optimization(const OptimizationConfig& cfg, const LatticePropertyTable& table,
                                           const Domain& dom, DriverCallbacks cb = {}) {
    cfg.validate();
    const int ncell = dom.grid.cell_count();

    OptimizationResult result;
    result.design = DesignField::constant(ncell, 0.0, 0.0);

    FlowSolver flow_solver(dom, cfg.phys, cfg.flow);
    ThermalSolver thermal_solver(dom, cfg.phys);
    MmaSolver mma(2 * ncell, 0.0, 1.0, cfg.mma_options());

    std::vector<double> x(static_cast<size_t>(2 * ncell), 0.0);
    FlowState warm = FlowState::zeros(dom.mesh);
    bool have_warm = false;

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        const auto t0 = std::chrono::steady_clock::now();
        const int stage = cfg.continuation.stage_of(iter);
        const double q_k = cfg.continuation.q_k_stages[static_cast<size_t>(stage)];
        const double q_f = cfg.continuation.q_f_stages[static_cast<size_t>(stage)];

        DesignField& d = result.design;
        for (int c = 0; c < ncell; ++c) {
            d.gamma1[static_cast<size_t>(c)] = x[static_cast<size_t>(c)];
            d.gamma2[static_cast<size_t>(c)] = x[static_cast<size_t>(ncell + c)];
        }

        const ElementFields fields =
            compute_element_fields(dom, d, table, cfg.phys, cfg.projection, q_k, q_f);
        flow_solver.set_drag_fields(fields.alpha_e, fields.beta_e);

        FlowState flow;
        try {
            flow = flow_solver.solve(have_warm ? &warm : nullptr);
        } catch (const FlowSolveError&) {
            FlowSolveSettings relaxed = cfg.flow;
            relaxed.under_relaxation = 0.5 * cfg.flow.under_relaxation;
            relaxed.max_picard_iters = 2 * cfg.flow.max_picard_iters;
            flow_solver.set_settings(relaxed);
            try {
                flow = flow_solver.solve(nullptr);
            } catch (const FlowSolveError& e2) {
                if (cb.failure_dump) cb.failure_dump(d, e2.what());
                throw;
            }
            flow_solver.set_settings(cfg.flow);
        }
        warm = flow;
        have_warm = true;

        ThermalState thermal = thermal_solver.solve(flow, fields.k_e, fields.h_e);

        const Gradients grads = compute_gradients(dom, d, fields, cfg.objective, cfg.phys, flow_solver,
                                                  thermal_solver, flow, thermal);
        const VolumeConstraint vol =
            volume_constraint(d, table, dom, cfg.projection, cfg.objective.volume_fraction);

        RunRecordRow row;
        row.iter = iter;
        row.K = grads.K;
        row.g = vol.g;
        row.Mnd = mnd(d.gamma1);
        row.q_k = q_k;
        row.q_f = q_f;

        std::vector<double> df0(static_cast<size_t>(2 * ncell)), dg(static_cast<size_t>(2 * ncell));
        for (int c = 0; c < ncell; ++c) {
            df0[static_cast<size_t>(c)] = grads.dK_dg1[static_cast<size_t>(c)];
            df0[static_cast<size_t>(ncell + c)] = grads.dK_dg2[static_cast<size_t>(c)];
            dg[static_cast<size_t>(c)] = vol.dg_dg1[static_cast<size_t>(c)];
            dg[static_cast<size_t>(ncell + c)] = vol.dg_dg2[static_cast<size_t>(c)];
        }
        x = mma.update(x, df0, vol.g, dg);

        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(row);
        result.flow = flow;
        result.thermal = thermal;
        result.has_states = true;

        if (cfg.checkpoint_every > 0 && iter % cfg.checkpoint_every == 0 && cb.checkpoint) {
            DesignField snap = DesignField::constant(ncell, 0.0, 0.0);
            for (int c = 0; c < ncell; ++c) {
                snap.gamma1[static_cast<size_t>(c)] = x[static_cast<size_t>(c)];
                snap.gamma2[static_cast<size_t>(c)] = x[static_cast<size_t>(ncell + c)];
            }
            cb.checkpoint(iter, snap);
        }
    }

    // Final design is the last MMA iterate.
    for (int c = 0; c < ncell; ++c) {
        result.design.gamma1[static_cast<size_t>(c)] = x[static_cast<size_t>(c)];
        result.design.gamma2[static_cast<size_t>(c)] = x[static_cast<size_t>(ncell + c)];
    }
    return result;
}

/// Forward evaluation of a fixed design at the final continuation stage
/// (the least-penalised, physically truest interpolation).
struct Evaluation {
    FlowState flow;
    ThermalState thermal;
    ElementFields fields;
    double K = 0.0;
    double u_in = 0.0;
    double energy_residual = 0.0;
};

inline Evaluation evaluate_design(const OptimizationConfig& cfg, const LatticePropertyTable& table,
                                  const Domain& dom, const DesignField& design) {
    const double q_k = cfg.continuation.q_k_stages.back();
    const double q_f = cfg.continuation.q_f_stages.back();
    Evaluation ev;
    ev.fields = compute_element_fields(dom, design, table, cfg.phys, cfg.projection, q_k, q_f);
    FlowSolver flow_solver(dom, cfg.phys, cfg.flow);
    flow_solver.set_drag_fields(ev.fields.alpha_e, ev.fields.beta_e);
    ev.flow = flow_solver.solve();
    ThermalSolver thermal_solver(dom, cfg.phys);
    ev.thermal = thermal_solver.solve(ev.flow, ev.fields.k_e, ev.fields.h_e);
    ev.K = objective(ev.thermal, dom, cfg.objective, cfg.phys.T_in);
    ev.u_in = inlet_mean_velocity(ev.flow, dom);
    ev.energy_residual =
        energy_balance_residual(ev.flow, ev.thermal, dom, cfg.phys, thermal_solver.heat_source());
    return ev;
}

} // namespace lattopt
