#pragma once

// Objective/constraint evaluation and the discrete adjoint of the coupled
// flow + thermal system. The thermal adjoint is solved first; its velocity
// sensitivity feeds the flow adjoint, and both are chained through the RAMP
// interpolation, the Heaviside projection and the cell->element mapping.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lattopt/flow.hpp"
#include "lattopt/grid.hpp"
#include "lattopt/properties.hpp"
#include "lattopt/thermal.hpp"

namespace lattopt {

struct ObjectiveSettings {
    double p_norm = 10.0;
    double volume_fraction = 1.0;
    void validate() const {
        if (!(p_norm >= 2.0)) throw std::invalid_argument("ObjectiveSettings: p_norm must be >= 2");
        if (!(volume_fraction > 0.0 && volume_fraction <= 1.0))
            throw std::invalid_argument("ObjectiveSettings: volume_fraction must lie in (0,1]");
    }
};

/// Per-element material fields derived from one design, plus the property
/// derivatives needed by the sensitivity chain (constant within each cell).
struct ElementFields {
    std::vector<double> g1h_cell;    ///< projected gamma1 per design cell
    std::vector<double> dproj_cell;  ///< d(projected)/d(gamma1) per design cell
    std::vector<InterpolatedProps> props_cell;
    std::vector<double> dh_dk_cell;
    std::vector<double> alpha_e, beta_e, k_e, h_e;  ///< per element
};

inline ElementFields compute_element_fields(const Domain& dom, const DesignField& design,
                                            const LatticePropertyTable& table, const PhysicalParams& phys,
                                            const ProjectionParams& proj, double q_k, double q_f) {
    if (design.size() != dom.grid.cell_count())
        throw std::invalid_argument("compute_element_fields: design size mismatch");
    ElementFields f;
    const int ncell = dom.grid.cell_count();
    f.g1h_cell.resize(static_cast<size_t>(ncell));
    f.dproj_cell.resize(static_cast<size_t>(ncell));
    f.props_cell.resize(static_cast<size_t>(ncell));
    f.dh_dk_cell.resize(static_cast<size_t>(ncell));
    for (int c = 0; c < ncell; ++c) {
        const auto [g1h, dproj] = heaviside_project(design.gamma1[static_cast<size_t>(c)], proj);
        f.g1h_cell[static_cast<size_t>(c)] = g1h;
        f.dproj_cell[static_cast<size_t>(c)] = dproj;
        f.props_cell[static_cast<size_t>(c)] =
            interpolate_properties(g1h, design.gamma2[static_cast<size_t>(c)], table, q_k, q_f, phys);
        f.dh_dk_cell[static_cast<size_t>(c)] =
            heat_transfer_coefficients(f.props_cell[static_cast<size_t>(c)].k, phys).dh_dk;
    }
    const int ne = dom.mesh.cell_count();
    const double alpha_f = phys.alpha_fluid();
    const auto htc_fluid = heat_transfer_coefficients(phys.k_f, phys);
    f.alpha_e.assign(static_cast<size_t>(ne), alpha_f);
    f.beta_e.assign(static_cast<size_t>(ne), 0.0);
    f.k_e.assign(static_cast<size_t>(ne), phys.k_f);
    f.h_e.assign(static_cast<size_t>(ne), htc_fluid.h);
    for (int e = 0; e < ne; ++e) {
        const int c = dom.grid.cell_of_element[static_cast<size_t>(e)];
        if (c < 0) continue;
        const InterpolatedProps& pr = f.props_cell[static_cast<size_t>(c)];
        f.alpha_e[static_cast<size_t>(e)] = pr.alpha;
        f.beta_e[static_cast<size_t>(e)] = pr.beta;
        f.k_e[static_cast<size_t>(e)] = pr.k;
        f.h_e[static_cast<size_t>(e)] = heat_transfer_coefficients(pr.k, phys).h;
    }
    return f;
}

/// p-norm of the base-plate temperature rise over the design footprint.
/// Negative rises are clamped to zero (possible on unconverged states).
inline double objective(const ThermalState& t, const Domain& dom, const ObjectiveSettings& set, double T_in,
                        std::vector<double>* dK_dTb = nullptr) {
    set.validate();
    const StructuredMesh& m = dom.mesh;
    const double p = set.p_norm;
    const double area = dom.design_area();
    double acc = 0.0;
    for (int e = 0; e < m.cell_count(); ++e) {
        if (!dom.is_design_element(e)) continue;
        const double dT = std::max(t.Tb0[static_cast<size_t>(e)] - T_in, 0.0);
        acc += std::pow(dT, p) * m.cell_area();
    }
    const double mean = acc / area;
    const double K = std::pow(mean, 1.0 / p);
    if (dK_dTb) {
        dK_dTb->assign(static_cast<size_t>(m.cell_count()), 0.0);
        if (mean > 0.0) {
            const double outer = std::pow(mean, 1.0 / p - 1.0) / area;
            for (int e = 0; e < m.cell_count(); ++e) {
                if (!dom.is_design_element(e)) continue;
                const double dT = t.Tb0[static_cast<size_t>(e)] - T_in;
                if (dT > 0.0)
                    (*dK_dTb)[static_cast<size_t>(e)] = outer * std::pow(dT, p - 1.0) * m.cell_area();
            }
        }
    }
    return K;
}

struct VolumeConstraint {
    double g = 0.0;                ///< integral (1 - eps) dA - f * A
    std::vector<double> dg_dg1;    ///< per design cell
    std::vector<double> dg_dg2;
};

/// Solid-volume constraint g <= 0 and its analytic gradient. Uses the
/// projected gamma1, consistent with the interpolation chain.
inline VolumeConstraint volume_constraint(const DesignField& d, const LatticePropertyTable& table,
                                          const Domain& dom, const ProjectionParams& proj, double f) {
    VolumeConstraint out;
    const int nc = dom.grid.cell_count();
    if (d.size() != nc) throw std::invalid_argument("volume_constraint: design size mismatch");
    out.dg_dg1.assign(static_cast<size_t>(nc), 0.0);
    out.dg_dg2.assign(static_cast<size_t>(nc), 0.0);
    const double cell_area = dom.grid.cell_size * dom.grid.cell_size;
    double solid = 0.0;
    for (int c = 0; c < nc; ++c) {
        const auto [g1h, dproj] = heaviside_project(d.gamma1[static_cast<size_t>(c)], proj);
        const double eps_p = table.eps(d.gamma2[static_cast<size_t>(c)]);
        const double deps_p = table.deps(d.gamma2[static_cast<size_t>(c)]);
        solid += cell_area * (1.0 - eps_p) * (1.0 - g1h);
        out.dg_dg1[static_cast<size_t>(c)] = -cell_area * (1.0 - eps_p) * dproj;
        out.dg_dg2[static_cast<size_t>(c)] = -cell_area * deps_p * (1.0 - g1h);
    }
    out.g = solid - f * dom.design_area();
    return out;
}

struct Gradients {
    double K = 0.0;
    std::vector<double> dK_dg1;  ///< per design cell
    std::vector<double> dK_dg2;
};

/// Adjoint gradient of the p-norm objective through the full chain
/// design -> projection -> interpolation -> flow -> thermal -> K.
inline Gradients compute_gradients(const Domain& dom, const DesignField& design, const ElementFields& fields,
                                   const ObjectiveSettings& obj, const PhysicalParams& phys,
                                   FlowSolver& flow_solver, ThermalSolver& thermal_solver,
                                   const FlowState& flow, const ThermalState& thermal) {
    const StructuredMesh& m = dom.mesh;
    const int ne = m.cell_count();
    const int ncell = dom.grid.cell_count();

    Gradients out;
    std::vector<double> dK_dTb;
    out.K = objective(thermal, dom, obj, dom.bc.T_in, &dK_dTb);

    // Thermal adjoint: A^T lam_t = -dK/dTheta.
    Eigen::VectorXd rhs_t = Eigen::VectorXd::Zero(2 * ne);
    for (int e = 0; e < ne; ++e) rhs_t[ne + e] = -dK_dTb[static_cast<size_t>(e)];
    const Eigen::VectorXd lam_t = thermal_solver.adjoint_solve(rhs_t);

    // Material sensitivities of the thermal residual.
    std::vector<double> d_k(static_cast<size_t>(ne), 0.0), d_h(static_cast<size_t>(ne), 0.0);
    thermal_solver.material_sensitivity(lam_t, thermal, d_k, d_h);

    // Flow adjoint: J^T lam_f = -(dRt/dU)^T lam_t.
    const Eigen::VectorXd rhs_f = -thermal_solver.flow_sensitivity(lam_t, flow, thermal, flow_solver.dofs());
    const Eigen::VectorXd lam_f = flow_solver.adjoint_solve(rhs_f, flow);

    std::vector<double> d_alpha(static_cast<size_t>(ne), 0.0), d_beta(static_cast<size_t>(ne), 0.0);
    flow_solver.accumulate_drag_sensitivity(lam_f, flow, d_alpha, d_beta);

    // Chain per-element sensitivities onto the design cells (summation is the
    // cell->element mapping transpose), then through the projection.
    out.dK_dg1.assign(static_cast<size_t>(ncell), 0.0);
    out.dK_dg2.assign(static_cast<size_t>(ncell), 0.0);
    for (int e = 0; e < ne; ++e) {
        const int c = dom.grid.cell_of_element[static_cast<size_t>(e)];
        if (c < 0) continue;
        const InterpolatedProps& pr = fields.props_cell[static_cast<size_t>(c)];
        const double dk_total = d_k[static_cast<size_t>(e)] +
                                d_h[static_cast<size_t>(e)] * fields.dh_dk_cell[static_cast<size_t>(c)];
        out.dK_dg1[static_cast<size_t>(c)] += d_alpha[static_cast<size_t>(e)] * pr.dalpha_dg1 +
                                              d_beta[static_cast<size_t>(e)] * pr.dbeta_dg1 +
                                              dk_total * pr.dk_dg1;
        out.dK_dg2[static_cast<size_t>(c)] += d_alpha[static_cast<size_t>(e)] * pr.dalpha_dg2 +
                                              d_beta[static_cast<size_t>(e)] * pr.dbeta_dg2 +
                                              dk_total * pr.dk_dg2;
    }
    for (int c = 0; c < ncell; ++c) out.dK_dg1[static_cast<size_t>(c)] *= fields.dproj_cell[static_cast<size_t>(c)];
    return out;
}

} // namespace lattopt
