#pragma once

// Steady reduced momentum/continuity solver on the staggered grid:
//   (6/5) rho (v.grad)v = -grad p + mu lap v - alpha v - beta |v| v,  div v = 0
// with fixed-pressure inlet/outlet segments. Picard iteration with optional
// Newton finishing; the exact Jacobian of the discrete residual doubles as
// the adjoint operator.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "lattopt/grid.hpp"
#include "lattopt/params.hpp"

namespace lattopt {

struct FlowSolveSettings {
    double nonlinear_tol = 1e-6;          ///< relative momentum-residual target
    int max_picard_iters = 200;
    double under_relaxation = 0.7;        ///< Picard relaxation factor in (0,1]
    double velocity_regularization = 1e-10;  ///< eps_v in |v| = sqrt(v.v + eps_v^2) [m/s]
    bool use_newton = true;               ///< switch to Newton once inside its basin
    double newton_switch = 1e-3;          ///< relative residual at which Newton takes over
    bool verbose = false;

    void validate() const {
        if (!(nonlinear_tol > 0)) throw std::invalid_argument("FlowSolveSettings: tol must be > 0");
        if (max_picard_iters < 1) throw std::invalid_argument("FlowSolveSettings: need >= 1 iteration");
        if (!(under_relaxation > 0 && under_relaxation <= 1))
            throw std::invalid_argument("FlowSolveSettings: under_relaxation in (0,1]");
        if (!(velocity_regularization > 0))
            throw std::invalid_argument("FlowSolveSettings: velocity_regularization must be > 0");
    }
};

/// Staggered velocity + cell pressure arrays. Fixed (wall) faces hold zeros.
struct FlowState {
    std::vector<double> u;  ///< x-velocity on vertical faces
    std::vector<double> v;  ///< y-velocity on horizontal faces
    std::vector<double> p;  ///< cell pressures

    static FlowState zeros(const StructuredMesh& m) {
        FlowState s;
        s.u.assign(static_cast<size_t>(m.u_count()), 0.0);
        s.v.assign(static_cast<size_t>(m.v_count()), 0.0);
        s.p.assign(static_cast<size_t>(m.cell_count()), 0.0);
        return s;
    }
};

struct FlowResidualSample {
    int iter;
    double residual_mom;
    double residual_mass;
};

class FlowSolveError : public std::runtime_error {
public:
    FlowSolveError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
    double final_residual() const { return residual_; }

private:
    double residual_;
};

/// Unknown numbering: u dofs, then v dofs, then all cell pressures.
struct FlowDofs {
    std::vector<int> u_dof;  ///< uface -> dof id or -1 (fixed zero)
    std::vector<int> v_dof;
    int n_u = 0, n_v = 0, n_p = 0;
    int total() const { return n_u + n_v + n_p; }
    int p_dof(int cell) const { return n_u + n_v + cell; }
};

class FlowSolver {
    using SpMat = Eigen::SparseMatrix<double>;
    using Triplet = Eigen::Triplet<double>;

public:
    FlowSolver(const Domain& dom, const PhysicalParams& phys, FlowSolveSettings settings = {})
        : dom_(dom), phys_(phys), set_(settings) {
        set_.validate();
        const StructuredMesh& m = dom_.mesh;
        if (dom_.bc.inlet_rows() < 1 || dom_.bc.outlet_j1 - dom_.bc.outlet_j0 < 1)
            throw std::invalid_argument("FlowSolver: domain needs inlet and outlet segments");
        dofs_.u_dof.assign(static_cast<size_t>(m.u_count()), -1);
        dofs_.v_dof.assign(static_cast<size_t>(m.v_count()), -1);
        int next = 0;
        for (int j = 0; j < m.ny; ++j)
            for (int i = 0; i <= m.nx; ++i) {
                const bool open = (i == 0 && dom_.bc.left_is_inlet(j)) ||
                                  (i == m.nx && dom_.bc.right_is_outlet(j));
                if ((i > 0 && i < m.nx) || open) dofs_.u_dof[static_cast<size_t>(m.uface(i, j))] = next++;
            }
        dofs_.n_u = next;
        for (int j = 1; j < m.ny; ++j)
            for (int i = 0; i < m.nx; ++i) dofs_.v_dof[static_cast<size_t>(m.vface(i, j))] = next++;
        dofs_.n_v = next - dofs_.n_u;
        dofs_.n_p = m.cell_count();
        alpha_e_.assign(static_cast<size_t>(m.cell_count()), phys_.alpha_fluid());
        beta_e_.assign(static_cast<size_t>(m.cell_count()), 0.0);
    }

    const FlowDofs& dofs() const { return dofs_; }
    const std::vector<FlowResidualSample>& residual_log() const { return log_; }
    const FlowSolveSettings& settings() const { return set_; }
    void set_settings(const FlowSolveSettings& s) { s.validate(); set_ = s; }

    void set_drag_fields(std::vector<double> alpha_e, std::vector<double> beta_e) {
        const size_t n = static_cast<size_t>(dom_.mesh.cell_count());
        if (alpha_e.size() != n || beta_e.size() != n)
            throw std::invalid_argument("FlowSolver: drag field size mismatch");
        for (size_t e = 0; e < n; ++e) {
            if (!(alpha_e[e] > 0.0)) throw std::invalid_argument("FlowSolver: alpha field must be positive");
            if (beta_e[e] < 0.0) throw std::invalid_argument("FlowSolver: beta field must be non-negative");
        }
        alpha_e_ = std::move(alpha_e);
        beta_e_ = std::move(beta_e);
    }

    /// Solves the nonlinear system; optional warm start. Falls back to an
    /// inlet-pressure continuation sweep if the direct iteration stalls.
    /// Throws FlowSolveError on non-convergence (message carries the
    /// residual).
    FlowState solve(const FlowState* warm = nullptr) {
        log_.clear();

        // Reference forcing: residual of the zero state is the boundary
        // pressure load alone.
        p_scale_ = 1.0;
        Eigen::VectorXd r0 = residual(FlowState::zeros(dom_.mesh));
        const double f_ref = r0.head(dofs_.n_u + dofs_.n_v).lpNorm<Eigen::Infinity>();
        if (f_ref <= 0.0) return FlowState::zeros(dom_.mesh);  // no pressure drop, no flow

        FlowState state = warm ? *warm : FlowState::zeros(dom_.mesh);
        double res = iterate(state, f_ref, set_.max_picard_iters);
        if (res <= set_.nonlinear_tol) {
            last_state_ = state;
            return state;
        }

        // Ramp the driving pressure from a fraction of the target, warm
        // starting each step.
        state = FlowState::zeros(dom_.mesh);
        bool ramp_ok = true;
        for (double frac : {0.125, 0.25, 0.5, 1.0}) {
            p_scale_ = frac;
            res = iterate(state, f_ref * frac, set_.max_picard_iters);
            const double tol_here = frac < 1.0 ? std::max(set_.nonlinear_tol, 1e-8) : set_.nonlinear_tol;
            if (res > tol_here) {
                ramp_ok = false;
                break;
            }
        }
        p_scale_ = 1.0;
        if (ramp_ok && res <= set_.nonlinear_tol) {
            last_state_ = state;
            return state;
        }
        Eigen::VectorXd rf = residual(state);
        res = rf.head(dofs_.n_u + dofs_.n_v).lpNorm<Eigen::Infinity>() / f_ref;
        throw FlowSolveError("flow solve did not converge: relative residual " + std::to_string(res), res);
    }

    /// Exact nonlinear residual, ordered [u rows, v rows, continuity rows].
    Eigen::VectorXd residual(const FlowState& s) const {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(dofs_.total());
        assemble(s, Mode::Residual, &r, nullptr, nullptr);
        return r;
    }

    /// Exact Jacobian of the residual with respect to the unknowns.
    SpMat jacobian(const FlowState& s) const {
        std::vector<Triplet> trip;
        trip.reserve(static_cast<size_t>(dofs_.total()) * 12);
        assemble(s, Mode::Jacobian, nullptr, &trip, nullptr);
        SpMat J(dofs_.total(), dofs_.total());
        J.setFromTriplets(trip.begin(), trip.end());
        return J;
    }

    /// Factorises the exact Jacobian at the given state for adjoint solves.
    void factorize_jacobian(const FlowState& s) {
        SpMat J = jacobian(s);
        if (!pattern_ready_newton_) {
            lu_newton_.analyzePattern(J);
            pattern_ready_newton_ = true;
        }
        lu_newton_.factorize(J);
        if (lu_newton_.info() != Eigen::Success)
            throw FlowSolveError("flow Jacobian factorisation failed", std::numeric_limits<double>::quiet_NaN());
    }

    /// Solves J^T lambda = rhs with the Jacobian taken at state s.
    Eigen::VectorXd adjoint_solve(const Eigen::VectorXd& rhs, const FlowState& s) {
        factorize_jacobian(s);
        return lu_newton_.transpose().solve(rhs);
    }

    /// Accumulates lambda^T dR/d(alpha_e) and lambda^T dR/d(beta_e) into the
    /// per-element outputs (the drag terms are the only parameter entries).
    void accumulate_drag_sensitivity(const Eigen::VectorXd& lambda, const FlowState& s,
                                     std::vector<double>& d_alpha, std::vector<double>& d_beta) const {
        const StructuredMesh& m = dom_.mesh;
        const double eps2 = set_.velocity_regularization * set_.velocity_regularization;
        for (int j = 0; j < m.ny; ++j)
            for (int i = 0; i <= m.nx; ++i) {
                const int dof = dofs_.u_dof[static_cast<size_t>(m.uface(i, j))];
                if (dof < 0) continue;
                const double uc = s.u[static_cast<size_t>(m.uface(i, j))];
                const double V = v_at_unode(s, i, j);
                const double sp = std::sqrt(uc * uc + V * V + eps2);
                const double lam = lambda[dof];
                const int eL = i > 0 ? m.cell(i - 1, j) : -1;
                const int eR = i < m.nx ? m.cell(i, j) : -1;
                const double w = (eL >= 0 && eR >= 0) ? 0.5 : 1.0;
                if (eL >= 0) {
                    d_alpha[static_cast<size_t>(eL)] += lam * w * uc;
                    d_beta[static_cast<size_t>(eL)] += lam * w * sp * uc;
                }
                if (eR >= 0) {
                    d_alpha[static_cast<size_t>(eR)] += lam * w * uc;
                    d_beta[static_cast<size_t>(eR)] += lam * w * sp * uc;
                }
            }
        for (int j = 1; j < m.ny; ++j)
            for (int i = 0; i < m.nx; ++i) {
                const int dof = dofs_.v_dof[static_cast<size_t>(m.vface(i, j))];
                if (dof < 0) continue;
                const double vc = s.v[static_cast<size_t>(m.vface(i, j))];
                const double U = u_at_vnode(s, i, j);
                const double sp = std::sqrt(vc * vc + U * U + eps2);
                const double lam = lambda[dof];
                const int eS = m.cell(i, j - 1), eN = m.cell(i, j);
                d_alpha[static_cast<size_t>(eS)] += lam * 0.5 * vc;
                d_alpha[static_cast<size_t>(eN)] += lam * 0.5 * vc;
                d_beta[static_cast<size_t>(eS)] += lam * 0.5 * sp * vc;
                d_beta[static_cast<size_t>(eN)] += lam * 0.5 * sp * vc;
            }
    }

private:
    enum class Mode { Residual, Jacobian, Picard };

    // Neighbour descriptor: its current value plus how a perturbation maps
    // back onto unknowns (own dof, or the centre value through a mirror
    // coefficient for ghost neighbours).
    struct Nb {
        double val = 0.0;
        int dof = -1;
        double self_coeff = 0.0;  ///< ghost = self_coeff * centre value
        bool ghost = false;
    };

    double mirror_sign_y(int edge_j) const {
        // edge_j = 0 bottom, 1 top
        if (edge_j == 0 && dom_.bc.bottom_symmetry) return 1.0;
        return dom_.bc.no_slip_walls ? -1.0 : 1.0;
    }
    double mirror_sign_left_for_v(int j) const {
        // v ghost outside the left edge; open segments extrapolate flat.
        if (j > dom_.bc.inlet_j0 && j < dom_.bc.inlet_j1) return 1.0;
        return dom_.bc.no_slip_walls ? -1.0 : 1.0;
    }
    double mirror_sign_right_for_v(int j) const {
        if (j > dom_.bc.outlet_j0 && j < dom_.bc.outlet_j1) return 1.0;
        return dom_.bc.no_slip_walls ? -1.0 : 1.0;
    }

    double v_at_unode(const FlowState& s, int i, int j) const {
        const StructuredMesh& m = dom_.mesh;
        double sum = 0.0;
        int n = 0;
        if (i > 0) {
            sum += s.v[static_cast<size_t>(m.vface(i - 1, j))] + s.v[static_cast<size_t>(m.vface(i - 1, j + 1))];
            n += 2;
        }
        if (i < m.nx) {
            sum += s.v[static_cast<size_t>(m.vface(i, j))] + s.v[static_cast<size_t>(m.vface(i, j + 1))];
            n += 2;
        }
        return sum / n;
    }
    double u_at_vnode(const FlowState& s, int i, int j) const {
        const StructuredMesh& m = dom_.mesh;
        return 0.25 * (s.u[static_cast<size_t>(m.uface(i, j - 1))] + s.u[static_cast<size_t>(m.uface(i + 1, j - 1))] +
                       s.u[static_cast<size_t>(m.uface(i, j))] + s.u[static_cast<size_t>(m.uface(i + 1, j))]);
    }

    // Shared assembly. Residual mode fills r; Jacobian mode fills exact
    // derivative triplets; Picard mode fills the frozen-coefficient linear
    // operator plus its right-hand side (returned through r).
    void assemble(const FlowState& s, Mode mode, Eigen::VectorXd* r, std::vector<Triplet>* trip,
                  Eigen::VectorXd* rhs) const {
        const StructuredMesh& m = dom_.mesh;
        const double h = m.h;
        const double conv_c = 1.2 * phys_.rho_f;  // 6/5 inertial factor
        const double mu = phys_.mu_f;
        const double eps2 = set_.velocity_regularization * set_.velocity_regularization;
        const bool jac = mode == Mode::Jacobian;
        const bool pic = mode == Mode::Picard;

        auto add = [&](int row, int dof, double val) {
            if (dof >= 0 && trip) trip->emplace_back(row, dof, val);
        };
        auto addR = [&](int row, double val) {
            if (r) (*r)[row] += val;
        };
        auto addB = [&](int row, double val) {
            if (rhs) (*rhs)[row] += val;
        };

        // ---- u-momentum rows ----
        for (int j = 0; j < m.ny; ++j) {
            for (int i = 0; i <= m.nx; ++i) {
                const int row = dofs_.u_dof[static_cast<size_t>(m.uface(i, j))];
                if (row < 0) continue;
                const int self = row;
                const double uc = s.u[static_cast<size_t>(m.uface(i, j))];

                // neighbours in x (may be absent at open ends)
                Nb W, E;
                const bool hasW = i > 0, hasE = i < m.nx;
                if (hasW) {
                    const int f = m.uface(i - 1, j);
                    W = {s.u[static_cast<size_t>(f)], dofs_.u_dof[static_cast<size_t>(f)], 0.0, false};
                }
                if (hasE) {
                    const int f = m.uface(i + 1, j);
                    E = {s.u[static_cast<size_t>(f)], dofs_.u_dof[static_cast<size_t>(f)], 0.0, false};
                }
                // neighbours in y (ghost across bottom/top edges)
                Nb S, N;
                if (j > 0) {
                    const int f = m.uface(i, j - 1);
                    S = {s.u[static_cast<size_t>(f)], dofs_.u_dof[static_cast<size_t>(f)], 0.0, false};
                } else {
                    const double msign = mirror_sign_y(0);
                    S = {msign * uc, -1, msign, true};
                }
                if (j < m.ny - 1) {
                    const int f = m.uface(i, j + 1);
                    N = {s.u[static_cast<size_t>(f)], dofs_.u_dof[static_cast<size_t>(f)], 0.0, false};
                } else {
                    const double msign = mirror_sign_y(1);
                    N = {msign * uc, -1, msign, true};
                }

                // transverse velocity at the u node
                int vdofs[4];
                double vw = 0.0, V = 0.0;
                int nv = 0;
                {
                    double sum = 0.0;
                    auto grab = [&](int ii, int jj) {
                        const int f = m.vface(ii, jj);
                        sum += s.v[static_cast<size_t>(f)];
                        vdofs[nv++] = dofs_.v_dof[static_cast<size_t>(f)];
                    };
                    if (i > 0) {
                        grab(i - 1, j);
                        grab(i - 1, j + 1);
                    }
                    if (i < m.nx) {
                        grab(i, j);
                        grab(i, j + 1);
                    }
                    vw = 1.0 / nv;
                    V = sum / nv;
                }

                const int eL = hasW ? m.cell(i - 1, j) : -1;
                const int eR = hasE ? m.cell(i, j) : -1;
                const double w_el = (eL >= 0 && eR >= 0) ? 0.5 : 1.0;
                double ab = 0.0, bb = 0.0;
                if (eL >= 0) {
                    ab += w_el * alpha_e_[static_cast<size_t>(eL)];
                    bb += w_el * beta_e_[static_cast<size_t>(eL)];
                }
                if (eR >= 0) {
                    ab += w_el * alpha_e_[static_cast<size_t>(eR)];
                    bb += w_el * beta_e_[static_cast<size_t>(eR)];
                }

                // --- convection, x sweep: conv_c * uc * du/dx (upwind) ---
                {
                    const bool up = uc >= 0.0;
                    if (up && hasW) {
                        const double g = (uc - W.val) / h;
                        addR(row, conv_c * uc * g);
                        if (jac) {
                            add(row, self, conv_c * (g + uc / h));
                            add(row, W.dof, -conv_c * uc / h);
                        }
                        if (pic) {
                            add(row, self, conv_c * uc / h);
                            add(row, W.dof, -conv_c * uc / h);
                        }
                    } else if (!up && hasE) {
                        const double g = (E.val - uc) / h;
                        addR(row, conv_c * uc * g);
                        if (jac) {
                            add(row, self, conv_c * (g - uc / h));
                            add(row, E.dof, conv_c * uc / h);
                        }
                        if (pic) {
                            add(row, self, -conv_c * uc / h);
                            add(row, E.dof, conv_c * uc / h);
                        }
                    }
                    // open-end upstream: fully developed, zero gradient
                }
                // --- convection, y sweep: conv_c * V * du/dy (upwind) ---
                {
                    const bool up = V >= 0.0;
                    const Nb& nb = up ? S : N;
                    const double g = up ? (uc - nb.val) / h : (nb.val - uc) / h;
                    addR(row, conv_c * V * g);
                    if (jac) {
                        const double dg_dc = up ? (1.0 - nb.self_coeff) / h : (nb.self_coeff - 1.0) / h;
                        add(row, self, conv_c * V * dg_dc);
                        if (!nb.ghost) add(row, nb.dof, conv_c * V * (up ? -1.0 : 1.0) / h);
                        for (int kk = 0; kk < nv; ++kk) add(row, vdofs[kk], conv_c * vw * g);
                    }
                    if (pic) {
                        const double dg_dc = up ? (1.0 - nb.self_coeff) / h : (nb.self_coeff - 1.0) / h;
                        add(row, self, conv_c * V * dg_dc);
                        if (!nb.ghost) add(row, nb.dof, conv_c * V * (up ? -1.0 : 1.0) / h);
                    }
                }
                // --- pressure gradient ---
                if (i == 0) {
                    const double pr = s.p[static_cast<size_t>(m.cell(0, j))];
                    addR(row, (pr - p_scale_ * dom_.bc.p_in) / (h / 2));
                    if (jac || pic) add(row, dofs_.p_dof(m.cell(0, j)), 2.0 / h);
                    addB(row, p_scale_ * dom_.bc.p_in * 2.0 / h);
                } else if (i == m.nx) {
                    const double pl = s.p[static_cast<size_t>(m.cell(m.nx - 1, j))];
                    addR(row, (p_scale_ * dom_.bc.p_out - pl) / (h / 2));
                    if (jac || pic) add(row, dofs_.p_dof(m.cell(m.nx - 1, j)), -2.0 / h);
                    addB(row, -p_scale_ * dom_.bc.p_out * 2.0 / h);
                } else {
                    const double pl = s.p[static_cast<size_t>(m.cell(i - 1, j))];
                    const double pr = s.p[static_cast<size_t>(m.cell(i, j))];
                    addR(row, (pr - pl) / h);
                    if (jac || pic) {
                        add(row, dofs_.p_dof(m.cell(i, j)), 1.0 / h);
                        add(row, dofs_.p_dof(m.cell(i - 1, j)), -1.0 / h);
                    }
                }
                // --- viscous: -mu lap(u); streamwise part dropped at open ends ---
                {
                    double lap = 0.0, dlap_dc = 0.0;
                    if (hasW && hasE) {
                        lap += (E.val + W.val - 2.0 * uc) / (h * h);
                        dlap_dc += -2.0 / (h * h);
                        if (jac || pic) {
                            add(row, E.dof, -mu / (h * h));
                            add(row, W.dof, -mu / (h * h));
                        }
                    }
                    lap += (N.val + S.val - 2.0 * uc) / (h * h);
                    dlap_dc += (N.self_coeff + S.self_coeff - 2.0) / (h * h);
                    if (jac || pic) {
                        if (!N.ghost) add(row, N.dof, -mu / (h * h));
                        if (!S.ghost) add(row, S.dof, -mu / (h * h));
                    }
                    addR(row, -mu * lap);
                    if (jac || pic) add(row, self, -mu * dlap_dc);
                }
                // --- drag + Forchheimer ---
                {
                    const double sp = std::sqrt(uc * uc + V * V + eps2);
                    addR(row, ab * uc + bb * sp * uc);
                    if (jac) {
                        add(row, self, ab + bb * (sp + uc * uc / sp));
                        for (int kk = 0; kk < nv; ++kk) add(row, vdofs[kk], bb * uc * (V / sp) * vw);
                    }
                    if (pic) add(row, self, ab + bb * sp);
                }
            }
        }

        // ---- v-momentum rows ----
        for (int j = 1; j < m.ny; ++j) {
            for (int i = 0; i < m.nx; ++i) {
                const int row = dofs_.v_dof[static_cast<size_t>(m.vface(i, j))];
                if (row < 0) continue;
                const int self = row;
                const double vc = s.v[static_cast<size_t>(m.vface(i, j))];

                Nb W, E, S, N;
                if (i > 0) {
                    const int f = m.vface(i - 1, j);
                    W = {s.v[static_cast<size_t>(f)], dofs_.v_dof[static_cast<size_t>(f)], 0.0, false};
                } else {
                    const double msign = mirror_sign_left_for_v(j);
                    W = {msign * vc, -1, msign, true};
                }
                if (i < m.nx - 1) {
                    const int f = m.vface(i + 1, j);
                    E = {s.v[static_cast<size_t>(f)], dofs_.v_dof[static_cast<size_t>(f)], 0.0, false};
                } else {
                    const double msign = mirror_sign_right_for_v(j);
                    E = {msign * vc, -1, msign, true};
                }
                {
                    const int f = m.vface(i, j - 1);
                    S = {s.v[static_cast<size_t>(f)], dofs_.v_dof[static_cast<size_t>(f)], 0.0, false};
                }
                {
                    const int f = m.vface(i, j + 1);
                    N = {s.v[static_cast<size_t>(f)], dofs_.v_dof[static_cast<size_t>(f)], 0.0, false};
                }

                int udofs[4];
                double U;
                {
                    const int f0 = m.uface(i, j - 1), f1 = m.uface(i + 1, j - 1);
                    const int f2 = m.uface(i, j), f3 = m.uface(i + 1, j);
                    U = 0.25 * (s.u[static_cast<size_t>(f0)] + s.u[static_cast<size_t>(f1)] +
                                s.u[static_cast<size_t>(f2)] + s.u[static_cast<size_t>(f3)]);
                    udofs[0] = dofs_.u_dof[static_cast<size_t>(f0)];
                    udofs[1] = dofs_.u_dof[static_cast<size_t>(f1)];
                    udofs[2] = dofs_.u_dof[static_cast<size_t>(f2)];
                    udofs[3] = dofs_.u_dof[static_cast<size_t>(f3)];
                }

                const int eS = m.cell(i, j - 1), eN = m.cell(i, j);
                const double ab = 0.5 * (alpha_e_[static_cast<size_t>(eS)] + alpha_e_[static_cast<size_t>(eN)]);
                const double bb = 0.5 * (beta_e_[static_cast<size_t>(eS)] + beta_e_[static_cast<size_t>(eN)]);

                // --- convection, x sweep: conv_c * U * dv/dx (upwind) ---
                {
                    const bool up = U >= 0.0;
                    const Nb& nb = up ? W : E;
                    const double g = up ? (vc - nb.val) / h : (nb.val - vc) / h;
                    addR(row, conv_c * U * g);
                    if (jac) {
                        const double dg_dc = up ? (1.0 - nb.self_coeff) / h : (nb.self_coeff - 1.0) / h;
                        add(row, self, conv_c * U * dg_dc);
                        if (!nb.ghost) add(row, nb.dof, conv_c * U * (up ? -1.0 : 1.0) / h);
                        for (int kk = 0; kk < 4; ++kk) add(row, udofs[kk], conv_c * 0.25 * g);
                    }
                    if (pic) {
                        const double dg_dc = up ? (1.0 - nb.self_coeff) / h : (nb.self_coeff - 1.0) / h;
                        add(row, self, conv_c * U * dg_dc);
                        if (!nb.ghost) add(row, nb.dof, conv_c * U * (up ? -1.0 : 1.0) / h);
                    }
                }
                // --- convection, y sweep: conv_c * vc * dv/dy (upwind) ---
                {
                    const bool up = vc >= 0.0;
                    const Nb& nb = up ? S : N;
                    const double g = up ? (vc - nb.val) / h : (nb.val - vc) / h;
                    addR(row, conv_c * vc * g);
                    if (jac) {
                        add(row, self, conv_c * (g + vc * (up ? 1.0 : -1.0) / h));
                        add(row, nb.dof, conv_c * vc * (up ? -1.0 : 1.0) / h);
                    }
                    if (pic) {
                        add(row, self, conv_c * vc * (up ? 1.0 : -1.0) / h);
                        add(row, nb.dof, conv_c * vc * (up ? -1.0 : 1.0) / h);
                    }
                }
                // --- pressure gradient ---
                {
                    const double ps = s.p[static_cast<size_t>(eS)], pn = s.p[static_cast<size_t>(eN)];
                    addR(row, (pn - ps) / h);
                    if (jac || pic) {
                        add(row, dofs_.p_dof(eN), 1.0 / h);
                        add(row, dofs_.p_dof(eS), -1.0 / h);
                    }
                }
                // --- viscous ---
                {
                    const double lap = (E.val + W.val - 2.0 * vc) / (h * h) + (N.val + S.val - 2.0 * vc) / (h * h);
                    const double dlap_dc = (E.self_coeff + W.self_coeff - 4.0) / (h * h);
                    addR(row, -mu * lap);
                    if (jac || pic) {
                        add(row, self, -mu * dlap_dc);
                        if (!E.ghost) add(row, E.dof, -mu / (h * h));
                        if (!W.ghost) add(row, W.dof, -mu / (h * h));
                        add(row, N.dof, -mu / (h * h));
                        add(row, S.dof, -mu / (h * h));
                    }
                }
                // --- drag + Forchheimer ---
                {
                    const double sp = std::sqrt(vc * vc + U * U + eps2);
                    addR(row, ab * vc + bb * sp * vc);
                    if (jac) {
                        add(row, self, ab + bb * (sp + vc * vc / sp));
                        for (int kk = 0; kk < 4; ++kk) add(row, udofs[kk], bb * vc * (U / sp) * 0.25);
                    }
                    if (pic) add(row, self, ab + bb * sp);
                }
            }
        }

        // ---- continuity rows ----
        for (int j = 0; j < m.ny; ++j) {
            for (int i = 0; i < m.nx; ++i) {
                const int row = dofs_.p_dof(m.cell(i, j));
                const int fuW = m.uface(i, j), fuE = m.uface(i + 1, j);
                const int fvS = m.vface(i, j), fvN = m.vface(i, j + 1);
                addR(row, (s.u[static_cast<size_t>(fuE)] - s.u[static_cast<size_t>(fuW)] +
                           s.v[static_cast<size_t>(fvN)] - s.v[static_cast<size_t>(fvS)]) /
                              h);
                if (jac || pic) {
                    add(row, dofs_.u_dof[static_cast<size_t>(fuE)], 1.0 / h);
                    add(row, dofs_.u_dof[static_cast<size_t>(fuW)], -1.0 / h);
                    add(row, dofs_.v_dof[static_cast<size_t>(fvN)], 1.0 / h);
                    add(row, dofs_.v_dof[static_cast<size_t>(fvS)], -1.0 / h);
                }
            }
        }
    }

    /// Adaptive Picard/Newton loop at the current pressure scale. Returns
    /// the last relative momentum residual. Stagnation first tries a damped
    /// Newton step, then reduces the relaxation factor.
    double iterate(FlowState& state, double f_ref, int max_iters) {
        double omega = set_.under_relaxation;
        double best = std::numeric_limits<double>::infinity();
        int since_best = 0;
        double res = std::numeric_limits<double>::infinity();
        for (int it = 1; it <= max_iters; ++it) {
            Eigen::VectorXd r = residual(state);
            res = r.head(dofs_.n_u + dofs_.n_v).lpNorm<Eigen::Infinity>() / f_ref;
            const double res_mass = r.tail(dofs_.n_p).lpNorm<Eigen::Infinity>();
            log_.push_back({static_cast<int>(log_.size()) + 1, res, res_mass});
            if (set_.verbose)
                std::fprintf(stderr, "flow iter %3d  res_mom %.3e  res_mass %.3e  omega %.2f\n", it, res,
                             res_mass, omega);
            if (res <= set_.nonlinear_tol) return res;

            if (res < 0.9 * best) {
                best = res;
                since_best = 0;
            } else {
                ++since_best;
            }

            const bool stalled = since_best >= 6;
            if (set_.use_newton && (res <= set_.newton_switch || stalled)) {
                if (newton_step(state, r, f_ref)) continue;
                if (stalled) {
                    omega = std::max(0.15, 0.6 * omega);
                    since_best = 0;
                }
            } else if (stalled) {
                omega = std::max(0.15, 0.6 * omega);
                since_best = 0;
            }
            picard_step(state, omega);
        }
        Eigen::VectorXd r = residual(state);
        res = r.head(dofs_.n_u + dofs_.n_v).lpNorm<Eigen::Infinity>() / f_ref;
        log_.push_back({static_cast<int>(log_.size()) + 1, res, r.tail(dofs_.n_p).lpNorm<Eigen::Infinity>()});
        return res;
    }

    Eigen::VectorXd pack(const FlowState& s) const {
        const StructuredMesh& m = dom_.mesh;
        Eigen::VectorXd x(dofs_.total());
        for (int f = 0; f < m.u_count(); ++f)
            if (dofs_.u_dof[static_cast<size_t>(f)] >= 0) x[dofs_.u_dof[static_cast<size_t>(f)]] = s.u[static_cast<size_t>(f)];
        for (int f = 0; f < m.v_count(); ++f)
            if (dofs_.v_dof[static_cast<size_t>(f)] >= 0) x[dofs_.v_dof[static_cast<size_t>(f)]] = s.v[static_cast<size_t>(f)];
        for (int c = 0; c < m.cell_count(); ++c) x[dofs_.p_dof(c)] = s.p[static_cast<size_t>(c)];
        return x;
    }
    void unpack(const Eigen::VectorXd& x, FlowState& s) const {
        const StructuredMesh& m = dom_.mesh;
        for (int f = 0; f < m.u_count(); ++f)
            if (dofs_.u_dof[static_cast<size_t>(f)] >= 0) s.u[static_cast<size_t>(f)] = x[dofs_.u_dof[static_cast<size_t>(f)]];
        for (int f = 0; f < m.v_count(); ++f)
            if (dofs_.v_dof[static_cast<size_t>(f)] >= 0) s.v[static_cast<size_t>(f)] = x[dofs_.v_dof[static_cast<size_t>(f)]];
        for (int c = 0; c < m.cell_count(); ++c) s.p[static_cast<size_t>(c)] = x[dofs_.p_dof(c)];
    }

    void picard_step(FlowState& state, double omega) {
        std::vector<Triplet> trip;
        trip.reserve(static_cast<size_t>(dofs_.total()) * 12);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(dofs_.total());
        assemble(state, Mode::Picard, nullptr, &trip, &b);
        SpMat M(dofs_.total(), dofs_.total());
        M.setFromTriplets(trip.begin(), trip.end());
        if (!pattern_ready_picard_) {
            lu_picard_.analyzePattern(M);
            pattern_ready_picard_ = true;
        }
        lu_picard_.factorize(M);
        if (lu_picard_.info() != Eigen::Success)
            throw FlowSolveError("flow linear system is singular", std::numeric_limits<double>::quiet_NaN());
        const Eigen::VectorXd x_new = lu_picard_.solve(b);
        const Eigen::VectorXd x_old = pack(state);
        const Eigen::VectorXd x = (1.0 - omega) * x_old + omega * x_new;
        unpack(x, state);
    }

    /// One damped Newton step; returns false if no progress was possible.
    bool newton_step(FlowState& state, const Eigen::VectorXd& r, double f_ref) {
        factorize_jacobian(state);
        const Eigen::VectorXd dx = lu_newton_.solve(-r);
        const double res0 = r.head(dofs_.n_u + dofs_.n_v).lpNorm<Eigen::Infinity>() / f_ref;
        const Eigen::VectorXd x0 = pack(state);
        double step = 1.0;
        FlowState trial = state;
        for (int k = 0; k < 8; ++k) {
            unpack(x0 + step * dx, trial);
            const Eigen::VectorXd rt = residual(trial);
            const double rn = rt.head(dofs_.n_u + dofs_.n_v).lpNorm<Eigen::Infinity>() / f_ref;
            if (rn < res0) {
                state = trial;
                return true;
            }
            step *= 0.5;
        }
        return false;
    }

    const Domain& dom_;
    PhysicalParams phys_;
    FlowSolveSettings set_;
    FlowDofs dofs_;
    std::vector<double> alpha_e_, beta_e_;
    std::vector<FlowResidualSample> log_;
    Eigen::SparseLU<SpMat> lu_picard_, lu_newton_;
    bool pattern_ready_picard_ = false, pattern_ready_newton_ = false;
    FlowState last_state_;
    double p_scale_ = 1.0;  ///< boundary-pressure continuation factor
};

/// Area-averaged normal velocity over the inlet segment.
inline double inlet_mean_velocity(const FlowState& f, const Domain& dom) {
    const StructuredMesh& m = dom.mesh;
    double sum = 0.0;
    int n = 0;
    for (int j = dom.bc.inlet_j0; j < dom.bc.inlet_j1; ++j) {
        sum += f.u[static_cast<size_t>(m.uface(0, j))];
        ++n;
    }
    return n > 0 ? sum / n : 0.0;
}

/// Relative imbalance between inlet and outlet volumetric fluxes.
inline double mass_balance_error(const FlowState& f, const Domain& dom) {
    const StructuredMesh& m = dom.mesh;
    double q_in = 0.0, q_out = 0.0;
    for (int j = dom.bc.inlet_j0; j < dom.bc.inlet_j1; ++j) q_in += f.u[static_cast<size_t>(m.uface(0, j))] * m.h;
    for (int j = dom.bc.outlet_j0; j < dom.bc.outlet_j1; ++j)
        q_out += f.u[static_cast<size_t>(m.uface(m.nx, j))] * m.h;
    const double scale = std::max(std::abs(q_in), std::abs(q_out));
    return scale > 0.0 ? std::abs(q_in - q_out) / scale : 0.0;
}

/// Element-centred velocity components (simple face averages).
inline void cell_velocity(const FlowState& f, const StructuredMesh& m, std::vector<double>& ux,
                          std::vector<double>& uy) {
    ux.assign(static_cast<size_t>(m.cell_count()), 0.0);
    uy.assign(static_cast<size_t>(m.cell_count()), 0.0);
    for (int j = 0; j < m.ny; ++j)
        for (int i = 0; i < m.nx; ++i) {
            const int c = m.cell(i, j);
            ux[static_cast<size_t>(c)] =
                0.5 * (f.u[static_cast<size_t>(m.uface(i, j))] + f.u[static_cast<size_t>(m.uface(i + 1, j))]);
            uy[static_cast<size_t>(c)] =
                0.5 * (f.v[static_cast<size_t>(m.vface(i, j))] + f.v[static_cast<size_t>(m.vface(i, j + 1))]);
        }
}

} // namespace lattopt
