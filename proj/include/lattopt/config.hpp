#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lattopt/adjoint.hpp"
#include "lattopt/flow.hpp"
#include "lattopt/grid.hpp"
#include "lattopt/io.hpp"
#include "lattopt/mma.hpp"
#include "lattopt/params.hpp"
#include "lattopt/properties.hpp"

namespace lattopt {

/// Whole-run configuration. Every key of the sectioned text format maps to
/// exactly one field; unknown keys are hard errors.
struct OptimizationConfig {
    PhysicalParams phys;
    double P_in = 10.0;  ///< inlet gauge pressure [Pa]

    // [domain]
    double cell_size = 2.5e-3;
    int mesh_refinement = 4;
    bool symmetry = true;
    int plenum_cells = 1;
    bool no_slip_walls = false;

    // [lattice]
    double d_min = 0.3e-3;
    double d_max = 1.3e-3;
    int n_layers_z = 2;
    std::string property_table;  ///< CSV path; empty selects the built-in table
    double reconstruct_threshold = 0.5;
    int stl_sides = 16;

    FlowSolveSettings flow;

    // [optimization]
    int iterations = 200;
    ContinuationSchedule continuation;
    double move_limit = 0.15;
    double asymptote_init = 0.5;
    double asymptote_grow = 1.2;
    double asymptote_shrink = 0.7;
    ObjectiveSettings objective;
    int checkpoint_every = 0;  ///< 0 disables design checkpoints
    bool timing_in_history = true;

    ProjectionParams projection;

    // [metrics]
    bool nu_bottom_offset = true;

    // [random]
    std::uint64_t rng_seed = 12345;
    int random_samples = 30;
    double void_prob_min = 0.2;
    double void_prob_max = 0.8;

    // [output]
    std::string output_dir = "out";

    DomainSpec domain_spec() const {
        DomainSpec s = DomainSpec::from(phys);
        s.cell_size = cell_size;
        s.refinement = mesh_refinement;
        s.symmetry = symmetry;
        s.plenum_cells = plenum_cells;
        s.no_slip_walls = no_slip_walls;
        s.P_in = P_in;
        return s;
    }

    LatticePropertyTable load_table() const {
        if (property_table.empty())
            return default_property_table(d_min, d_max, cell_size, phys.k_f, phys.k_s);
        return load_property_table_csv(property_table, d_min, d_max);
    }

    MmaOptions mma_options() const {
        MmaOptions o;
        o.move_limit = move_limit;
        o.asy_init = asymptote_init;
        o.asy_grow = asymptote_grow;
        o.asy_shrink = asymptote_shrink;
        return o;
    }

    void validate() const {
        phys.validate();
        if (!(P_in >= 0.0)) throw std::invalid_argument("config: p_in must be >= 0");
        if (!(d_max > d_min && d_min > 0)) throw std::invalid_argument("config: need 0 < d_min < d_max");
        if (n_layers_z < 1) throw std::invalid_argument("config: n_layers_z must be >= 1");
        if (iterations < 0) throw std::invalid_argument("config: iterations must be >= 0");
        flow.validate();
        continuation.validate();
        objective.validate();
        projection.validate();
        if (!(void_prob_min >= 0 && void_prob_max <= 1 && void_prob_min <= void_prob_max))
            throw std::invalid_argument("config: void probability range must satisfy 0 <= lo <= hi <= 1");
        if (random_samples < 1) throw std::invalid_argument("config: samples must be >= 1");
    }

    static OptimizationConfig parse(const std::string& text) {
        OptimizationConfig c;
        for (const ConfigEntry& e : parse_config_text(text)) c.apply(e);
        c.validate();
        return c;
    }

    static OptimizationConfig load(const std::string& path) { return parse(io::read_file(path)); }

    void apply(const ConfigEntry& e) {
        const std::string id = e.section + "." + e.key;
        auto d = [&] { return io::to_double(e.value); };
        auto i = [&] { return static_cast<int>(io::to_double(e.value)); };
        auto b = [&] { return parse_bool(e.value); };

        if (id == "physical.mu_f") phys.mu_f = d();
        else if (id == "physical.rho_f") phys.rho_f = d();
        else if (id == "physical.k_f") phys.k_f = d();
        else if (id == "physical.c_pf") phys.c_pf = d();
        else if (id == "physical.k_s") phys.k_s = d();
        else if (id == "physical.rho_s") phys.rho_s = d();
        else if (id == "physical.c_ps") phys.c_ps = d();
        else if (id == "physical.q_s") phys.q_s = d();
        else if (id == "physical.T_in") phys.T_in = d();
        else if (id == "physical.half_thickness_fluid") phys.H_t = d();
        else if (id == "physical.half_thickness_base") phys.H_b = d();
        else if (id == "physical.L_x") phys.L_x = d();
        else if (id == "physical.L_y") phys.L_y = d();
        else if (id == "physical.L_in") phys.L_in = d();
        else if (id == "physical.p_in") P_in = d();
        else if (id == "domain.cell_size") cell_size = d();
        else if (id == "domain.mesh_refinement") mesh_refinement = i();
        else if (id == "domain.symmetry") symmetry = b();
        else if (id == "domain.plenum_cells") plenum_cells = i();
        else if (id == "domain.no_slip_walls") no_slip_walls = b();
        else if (id == "lattice.d_min") d_min = d();
        else if (id == "lattice.d_max") d_max = d();
        else if (id == "lattice.n_layers_z") n_layers_z = i();
        else if (id == "lattice.property_table") property_table = e.value;
        else if (id == "lattice.reconstruct_threshold") reconstruct_threshold = d();
        else if (id == "lattice.stl_sides") stl_sides = i();
        else if (id == "flow.nonlinear_tol") flow.nonlinear_tol = d();
        else if (id == "flow.max_picard_iters") flow.max_picard_iters = i();
        else if (id == "flow.under_relaxation") flow.under_relaxation = d();
        else if (id == "flow.velocity_regularization") flow.velocity_regularization = d();
        else if (id == "flow.use_newton") flow.use_newton = b();
        else if (id == "optimization.iterations") iterations = i();
        else if (id == "optimization.stage_length") continuation.stage_length = i();
        else if (id == "optimization.qk_stages") continuation.q_k_stages = parse_double_list(e.value);
        else if (id == "optimization.qf_stages") continuation.q_f_stages = parse_double_list(e.value);
        else if (id == "optimization.move_limit") move_limit = d();
        else if (id == "optimization.asymptote_init") asymptote_init = d();
        else if (id == "optimization.asymptote_grow") asymptote_grow = d();
        else if (id == "optimization.asymptote_shrink") asymptote_shrink = d();
        else if (id == "optimization.p_norm") objective.p_norm = d();
        else if (id == "optimization.volume_fraction") objective.volume_fraction = d();
        else if (id == "optimization.checkpoint_every") checkpoint_every = i();
        else if (id == "optimization.timing_in_history") timing_in_history = b();
        else if (id == "projection.beta") projection.beta = d();
        else if (id == "projection.eta") projection.eta = d();
        else if (id == "metrics.bottom_offset") nu_bottom_offset = b();
        else if (id == "random.seed") rng_seed = static_cast<std::uint64_t>(std::stoull(e.value));
        else if (id == "random.samples") random_samples = i();
        else if (id == "random.void_prob_min") void_prob_min = d();
        else if (id == "random.void_prob_max") void_prob_max = d();
        else if (id == "output.directory") output_dir = e.value;
        else throw std::invalid_argument("config: unknown key '" + id + "'");
    }

    std::string serialize() const {
        std::ostringstream o;
        auto f = io::fmt;
        o << "[physical]\n";
        o << "mu_f = " << f(phys.mu_f) << "\n";
        o << "rho_f = " << f(phys.rho_f) << "\n";
        o << "k_f = " << f(phys.k_f) << "\n";
        o << "c_pf = " << f(phys.c_pf) << "\n";
        o << "k_s = " << f(phys.k_s) << "\n";
        o << "rho_s = " << f(phys.rho_s) << "\n";
        o << "c_ps = " << f(phys.c_ps) << "\n";
        o << "q_s = " << f(phys.q_s) << "\n";
        o << "T_in = " << f(phys.T_in) << "\n";
        o << "half_thickness_fluid = " << f(phys.H_t) << "\n";
        o << "half_thickness_base = " << f(phys.H_b) << "\n";
        o << "L_x = " << f(phys.L_x) << "\n";
        o << "L_y = " << f(phys.L_y) << "\n";
        o << "L_in = " << f(phys.L_in) << "\n";
        o << "p_in = " << f(P_in) << "\n";
        o << "\n[domain]\n";
        o << "cell_size = " << f(cell_size) << "\n";
        o << "mesh_refinement = " << mesh_refinement << "\n";
        o << "symmetry = " << (symmetry ? "true" : "false") << "\n";
        o << "plenum_cells = " << plenum_cells << "\n";
        o << "no_slip_walls = " << (no_slip_walls ? "true" : "false") << "\n";
        o << "\n[lattice]\n";
        o << "d_min = " << f(d_min) << "\n";
        o << "d_max = " << f(d_max) << "\n";
        o << "n_layers_z = " << n_layers_z << "\n";
        o << "property_table = " << property_table << "\n";
        o << "reconstruct_threshold = " << f(reconstruct_threshold) << "\n";
        o << "stl_sides = " << stl_sides << "\n";
        o << "\n[flow]\n";
        o << "nonlinear_tol = " << f(flow.nonlinear_tol) << "\n";
        o << "max_picard_iters = " << flow.max_picard_iters << "\n";
        o << "under_relaxation = " << f(flow.under_relaxation) << "\n";
        o << "velocity_regularization = " << f(flow.velocity_regularization) << "\n";
        o << "use_newton = " << (flow.use_newton ? "true" : "false") << "\n";
        o << "\n[optimization]\n";
        o << "iterations = " << iterations << "\n";
        o << "stage_length = " << continuation.stage_length << "\n";
        o << "qk_stages = " << format_double_list(continuation.q_k_stages) << "\n";
        o << "qf_stages = " << format_double_list(continuation.q_f_stages) << "\n";
        o << "move_limit = " << f(move_limit) << "\n";
        o << "asymptote_init = " << f(asymptote_init) << "\n";
        o << "asymptote_grow = " << f(asymptote_grow) << "\n";
        o << "asymptote_shrink = " << f(asymptote_shrink) << "\n";
        o << "p_norm = " << f(objective.p_norm) << "\n";
        o << "volume_fraction = " << f(objective.volume_fraction) << "\n";
        o << "checkpoint_every = " << checkpoint_every << "\n";
        o << "timing_in_history = " << (timing_in_history ? "true" : "false") << "\n";
        o << "\n[projection]\n";
        o << "beta = " << f(projection.beta) << "\n";
        o << "eta = " << f(projection.eta) << "\n";
        o << "\n[metrics]\n";
        o << "bottom_offset = " << (nu_bottom_offset ? "true" : "false") << "\n";
        o << "\n[random]\n";
        o << "seed = " << rng_seed << "\n";
        o << "samples = " << random_samples << "\n";
        o << "void_prob_min = " << f(void_prob_min) << "\n";
        o << "void_prob_max = " << f(void_prob_max) << "\n";
        o << "\n[output]\n";
        o << "directory = " << output_dir << "\n";
        return o.str();
    }

    void save(const std::string& path) const { io::write_file(path, serialize()); }
};

} // namespace lattopt
