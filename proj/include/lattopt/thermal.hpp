#pragma once

// Coupled two-layer energy solve: bulk fluid temperature T0 advected by the
// converged Darcy velocity and the base-plate centre temperature Tb0, linked
// through the interfacial coefficient h. Advection is first-order upwind on
// the staggered face velocities, so the discrete fluxes telescope and the
// global energy balance closes.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lattopt/flow.hpp"
#include "lattopt/grid.hpp"
#include "lattopt/params.hpp"

namespace lattopt {

struct ThermalState {
    std::vector<double> T0;   ///< bulk fluid temperature [K]
    std::vector<double> Tb0;  ///< base-plate centre temperature [K]
};

class ThermalSolver {
    using SpMat = Eigen::SparseMatrix<double>;
    using Triplet = Eigen::Triplet<double>;

public:
    ThermalSolver(const Domain& dom, const PhysicalParams& phys) : dom_(dom), phys_(phys) {
        const int nc = dom_.mesh.cell_count();
        q_e_.assign(static_cast<size_t>(nc), 0.0);
        for (int e = 0; e < nc; ++e)
            if (dom_.is_design_element(e)) q_e_[static_cast<size_t>(e)] = phys_.q_s;
    }

    /// Per-element heat source override (the default heats the design
    /// footprint with q_s and leaves the plenums cold).
    void set_heat_source(std::vector<double> q_e) {
        if (q_e.size() != static_cast<size_t>(dom_.mesh.cell_count()))
            throw std::invalid_argument("ThermalSolver: heat source size mismatch");
        q_e_ = std::move(q_e);
    }
    const std::vector<double>& heat_source() const { return q_e_; }

    /// Solves for (T0, Tb0) given the flow and the per-element conductivity
    /// and interfacial-coefficient fields.
    ThermalState solve(const FlowState& flow, const std::vector<double>& k_e, const std::vector<double>& h_e) {
        const int nc = dom_.mesh.cell_count();
        if (k_e.size() != static_cast<size_t>(nc) || h_e.size() != static_cast<size_t>(nc))
            throw std::invalid_argument("ThermalSolver: field size mismatch");
        double h_max = 0.0;
        for (int e = 0; e < nc; ++e) {
            if (!(k_e[static_cast<size_t>(e)] > 0.0))
                throw std::invalid_argument("ThermalSolver: conductivity must be positive");
            h_max = std::max(h_max, h_e[static_cast<size_t>(e)]);
        }
        // h == 0 everywhere leaves the base plate with pure Neumann data.
        if (!(h_max > 0.0))
            throw std::runtime_error("thermal system is singular: interfacial coupling is zero everywhere");

        std::vector<Triplet> trip;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * nc);
        assemble(flow, k_e, h_e, trip, b);
        SpMat A(2 * nc, 2 * nc);
        A.setFromTriplets(trip.begin(), trip.end());
        if (!pattern_ready_) {
            lu_.analyzePattern(A);
            pattern_ready_ = true;
        }
        lu_.factorize(A);
        if (lu_.info() != Eigen::Success)
            throw std::runtime_error("thermal system is singular (is the coupling coefficient zero?)");
        const Eigen::VectorXd x = lu_.solve(b);

        ThermalState t;
        t.T0.assign(static_cast<size_t>(nc), 0.0);
        t.Tb0.assign(static_cast<size_t>(nc), 0.0);
        for (int c = 0; c < nc; ++c) {
            t.T0[static_cast<size_t>(c)] = x[c];
            t.Tb0[static_cast<size_t>(c)] = x[nc + c];
        }
        last_flow_ = &flow;
        return t;
    }

    /// Solves A^T lambda = rhs with the last assembled operator.
    Eigen::VectorXd adjoint_solve(const Eigen::VectorXd& rhs) {
        if (!pattern_ready_) throw std::logic_error("ThermalSolver: no factorisation available");
        return lu_.transpose().solve(rhs);
    }

    /// Accumulates lambda^T dR/d(u_face) into a flow-dof vector. Upwind
    /// branches are taken at the current face velocities.
    Eigen::VectorXd flow_sensitivity(const Eigen::VectorXd& lambda, const FlowState& flow,
                                     const ThermalState& t, const FlowDofs& fdofs) const {
        const StructuredMesh& m = dom_.mesh;
        const double coeff = phys_.rho_f * phys_.c_pf / m.h;
        Eigen::VectorXd out = Eigen::VectorXd::Zero(fdofs.total());
        auto upT = [&](double vel, double Tminus, double Tplus) { return vel >= 0.0 ? Tminus : Tplus; };
        for (int j = 0; j < m.ny; ++j) {
            for (int i = 0; i < m.nx; ++i) {
                const int c = m.cell(i, j);
                const double lamc = lambda[c];
                // east face
                {
                    const int f = m.uface(i + 1, j);
                    const int dof = fdofs.u_dof[static_cast<size_t>(f)];
                    if (dof >= 0) {
                        const double uf = flow.u[static_cast<size_t>(f)];
                        const double Tface = (i + 1 <= m.nx - 1)
                                                 ? upT(uf, t.T0[static_cast<size_t>(c)],
                                                       t.T0[static_cast<size_t>(m.cell(i + 1, j))])
                                                 : t.T0[static_cast<size_t>(c)];
                        out[dof] += lamc * coeff * Tface;
                    }
                }
                // west face
                {
                    const int f = m.uface(i, j);
                    const int dof = fdofs.u_dof[static_cast<size_t>(f)];
                    if (dof >= 0) {
                        const double uf = flow.u[static_cast<size_t>(f)];
                        double Tface;
                        if (i == 0)
                            Tface = uf >= 0.0 ? dom_.bc.T_in : t.T0[static_cast<size_t>(c)];
                        else
                            Tface = upT(uf, t.T0[static_cast<size_t>(m.cell(i - 1, j))], t.T0[static_cast<size_t>(c)]);
                        out[dof] -= lamc * coeff * Tface;
                    }
                }
                // north face
                {
                    const int f = m.vface(i, j + 1);
                    const int dof = fdofs.v_dof[static_cast<size_t>(f)];
                    if (dof >= 0) {
                        const double vf = flow.v[static_cast<size_t>(f)];
                        const double Tface =
                            upT(vf, t.T0[static_cast<size_t>(c)], t.T0[static_cast<size_t>(m.cell(i, j + 1))]);
                        out[dof] += lamc * coeff * Tface;
                    }
                }
                // south face
                {
                    const int f = m.vface(i, j);
                    const int dof = fdofs.v_dof[static_cast<size_t>(f)];
                    if (dof >= 0) {
                        const double vf = flow.v[static_cast<size_t>(f)];
                        const double Tface =
                            upT(vf, t.T0[static_cast<size_t>(m.cell(i, j - 1))], t.T0[static_cast<size_t>(c)]);
                        out[dof] -= lamc * coeff * Tface;
                    }
                }
            }
        }
        return out;
    }

    /// Accumulates lambda^T dR/d(k_e) (diffusion faces) and lambda^T dR/d(h_e)
    /// (layer coupling) into per-element outputs.
    void material_sensitivity(const Eigen::VectorXd& lambda, const ThermalState& t,
                              std::vector<double>& d_k, std::vector<double>& d_h) const {
        const StructuredMesh& m = dom_.mesh;
        const int nc = m.cell_count();
        const double ih2 = 1.0 / (m.h * m.h);
        for (int j = 0; j < m.ny; ++j) {
            for (int i = 0; i < m.nx; ++i) {
                const int c = m.cell(i, j);
                const double T0c = t.T0[static_cast<size_t>(c)];
                // interior diffusion faces, counted once (east and north)
                if (i + 1 < m.nx) {
                    const int nb = m.cell(i + 1, j);
                    const double dT = t.T0[static_cast<size_t>(nb)] - T0c;
                    // face conductivity is the arithmetic mean of the two cells
                    const double g = ih2 * dT * 0.5;
                    const double contrib = (-lambda[c] + lambda[nb]) * g;
                    d_k[static_cast<size_t>(c)] += contrib;
                    d_k[static_cast<size_t>(nb)] += contrib;
                }
                if (j + 1 < m.ny) {
                    const int nb = m.cell(i, j + 1);
                    const double dT = t.T0[static_cast<size_t>(nb)] - T0c;
                    const double g = ih2 * dT * 0.5;
                    const double contrib = (-lambda[c] + lambda[nb]) * g;
                    d_k[static_cast<size_t>(c)] += contrib;
                    d_k[static_cast<size_t>(nb)] += contrib;
                }
                // Dirichlet inlet face
                if (i == 0 && dom_.bc.left_is_inlet(j))
                    d_k[static_cast<size_t>(c)] += -lambda[c] * 2.0 * ih2 * (dom_.bc.T_in - T0c);
                // layer coupling
                const double dT = t.Tb0[static_cast<size_t>(c)] - T0c;
                d_h[static_cast<size_t>(c)] += -lambda[c] * dT / (2.0 * phys_.H_t);
                d_h[static_cast<size_t>(c)] += lambda[nc + c] * dT / (2.0 * phys_.H_b);
            }
        }
    }

private:
    void assemble(const FlowState& flow, const std::vector<double>& k_e, const std::vector<double>& h_e,
                  std::vector<Triplet>& trip, Eigen::VectorXd& b) const {
        const StructuredMesh& m = dom_.mesh;
        const int nc = m.cell_count();
        const double adv = phys_.rho_f * phys_.c_pf / m.h;
        const double ih2 = 1.0 / (m.h * m.h);
        trip.reserve(static_cast<size_t>(nc) * 12);

        for (int j = 0; j < m.ny; ++j) {
            for (int i = 0; i < m.nx; ++i) {
                const int c = m.cell(i, j);
                const int rowT = c, rowB = nc + c;
                const double kc = k_e[static_cast<size_t>(c)];
                const double hc = h_e[static_cast<size_t>(c)];

                // --- T0 row: advection (upwind), flux form ---
                // east
                {
                    const double uf = flow.u[static_cast<size_t>(m.uface(i + 1, j))];
                    if (i + 1 < m.nx) {
                        const int nb = m.cell(i + 1, j);
                        if (uf >= 0.0)
                            trip.emplace_back(rowT, c, adv * uf);
                        else
                            trip.emplace_back(rowT, nb, adv * uf);
                    } else {
                        // outlet: outflow carries the cell value; backflow too
                        // (zero-gradient from outside)
                        trip.emplace_back(rowT, c, adv * uf);
                    }
                }
                // west
                {
                    const double uf = flow.u[static_cast<size_t>(m.uface(i, j))];
                    if (i > 0) {
                        const int nb = m.cell(i - 1, j);
                        if (uf >= 0.0)
                            trip.emplace_back(rowT, nb, -adv * uf);
                        else
                            trip.emplace_back(rowT, c, -adv * uf);
                    } else {
                        if (uf >= 0.0)
                            b[rowT] += adv * uf * dom_.bc.T_in;
                        else
                            trip.emplace_back(rowT, c, -adv * uf);
                    }
                }
                // north
                {
                    const double vf = flow.v[static_cast<size_t>(m.vface(i, j + 1))];
                    if (j + 1 < m.ny) {
                        const int nb = m.cell(i, j + 1);
                        if (vf >= 0.0)
                            trip.emplace_back(rowT, c, adv * vf);
                        else
                            trip.emplace_back(rowT, nb, adv * vf);
                    }
                    // top boundary face velocity is zero
                }
                // south
                {
                    const double vf = flow.v[static_cast<size_t>(m.vface(i, j))];
                    if (j > 0) {
                        const int nb = m.cell(i, j - 1);
                        if (vf >= 0.0)
                            trip.emplace_back(rowT, nb, -adv * vf);
                        else
                            trip.emplace_back(rowT, c, -adv * vf);
                    }
                }

                // --- T0 row: diffusion ---
                auto diffuse = [&](int nb) {
                    const double kf = 0.5 * (kc + k_e[static_cast<size_t>(nb)]);
                    trip.emplace_back(rowT, c, kf * ih2);
                    trip.emplace_back(rowT, nb, -kf * ih2);
                };
                if (i + 1 < m.nx) diffuse(m.cell(i + 1, j));
                if (i > 0) diffuse(m.cell(i - 1, j));
                if (j + 1 < m.ny) diffuse(m.cell(i, j + 1));
                if (j > 0) diffuse(m.cell(i, j - 1));
                if (i == 0 && dom_.bc.left_is_inlet(j)) {
                    trip.emplace_back(rowT, c, 2.0 * kc * ih2);
                    b[rowT] += 2.0 * kc * ih2 * dom_.bc.T_in;
                }
                // outlet face: zero diffusive flux; walls/symmetry adiabatic

                // --- T0 row: interfacial coupling ---
                trip.emplace_back(rowT, c, hc / (2.0 * phys_.H_t));
                trip.emplace_back(rowT, nc + c, -hc / (2.0 * phys_.H_t));

                // --- Tb0 row: base-plate conduction + coupling + source ---
                auto conduct = [&](int nb) {
                    trip.emplace_back(rowB, nc + c, phys_.k_s * ih2);
                    trip.emplace_back(rowB, nc + nb, -phys_.k_s * ih2);
                };
                if (i + 1 < m.nx) conduct(m.cell(i + 1, j));
                if (i > 0) conduct(m.cell(i - 1, j));
                if (j + 1 < m.ny) conduct(m.cell(i, j + 1));
                if (j > 0) conduct(m.cell(i, j - 1));
                trip.emplace_back(rowB, nc + c, hc / (2.0 * phys_.H_b));
                trip.emplace_back(rowB, c, -hc / (2.0 * phys_.H_b));
                b[rowB] += q_e_[static_cast<size_t>(c)] / (2.0 * phys_.H_b);
            }
        }
    }

    const Domain& dom_;
    PhysicalParams phys_;
    std::vector<double> q_e_;
    Eigen::SparseLU<SpMat> lu_;
    bool pattern_ready_ = false;
    const FlowState* last_flow_ = nullptr;
};

/// Global heat-balance check: imbalance between the applied bottom heating
/// and the enthalpy carried out through the open boundaries, as a fraction
/// of the heating. Returns 0 for an unheated problem.
inline double energy_balance_residual(const FlowState& flow, const ThermalState& t, const Domain& dom,
                                      const PhysicalParams& phys, const std::vector<double>& q_e) {
    const StructuredMesh& m = dom.mesh;
    double q_total = 0.0;
    for (int e = 0; e < m.cell_count(); ++e) q_total += q_e[static_cast<size_t>(e)] * m.cell_area();
    if (q_total <= 0.0) return 0.0;

    double advected = 0.0;  // enthalpy flux relative to T_in through open faces
    const double c = phys.rho_f * phys.c_pf * 2.0 * phys.H_t * m.h;
    for (int j = 0; j < m.ny; ++j) {
        // inlet face (x = 0)
        {
            const double uf = flow.u[static_cast<size_t>(m.uface(0, j))];
            const double Tf = uf >= 0.0 ? dom.bc.T_in : t.T0[static_cast<size_t>(m.cell(0, j))];
            advected += -uf * c * (Tf - dom.bc.T_in);  // outward normal is -x
        }
        // outlet face (x = Lx)
        {
            const double uf = flow.u[static_cast<size_t>(m.uface(m.nx, j))];
            const double Tf = t.T0[static_cast<size_t>(m.cell(m.nx - 1, j))];
            advected += uf * c * (Tf - dom.bc.T_in);
        }
    }
    return std::abs(q_total - advected) / q_total;
}

} // namespace lattopt
