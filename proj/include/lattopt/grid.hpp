#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lattopt/params.hpp"

namespace lattopt {

/// Uniform quadrilateral mesh with a staggered velocity arrangement.
/// Cell-centred scalars index with cell(i,j); the x-velocity lives on
/// vertical faces uface(i,j) with i in [0,nx], the y-velocity on horizontal
/// faces vface(i,j) with j in [0,ny].
struct StructuredMesh {
    int nx = 0;
    int ny = 0;
    double h = 0.0;  ///< element edge length [m]

    int cell_count() const { return nx * ny; }
    int u_count() const { return (nx + 1) * ny; }
    int v_count() const { return nx * (ny + 1); }
    int cell(int i, int j) const { return j * nx + i; }
    int uface(int i, int j) const { return j * (nx + 1) + i; }
    int vface(int i, int j) const { return j * nx + i; }
    double xc(int i) const { return (i + 0.5) * h; }
    double yc(int j) const { return (j + 0.5) * h; }
    double cell_area() const { return h * h; }
};

/// Layout of design unit cells over the mesh. Plenum columns at the inlet
/// and outlet sides carry no design variables.
struct UnitGrid {
    double cell_size = 2.5e-3;  ///< lattice unit L [m]
    int n_cells_x = 0;          ///< design cells along the flow
    int n_cells_y = 0;          ///< design cells across the flow (half count when symmetric)
    int refinement = 4;         ///< mesh elements per cell edge
    bool symmetry = true;       ///< half-domain about the inlet-outlet centreline
    int plenum_cells = 1;       ///< depth of the inlet/outlet plenum strips [cells]
    std::vector<int> cell_of_element;  ///< element -> design cell, -1 in plenums

    int cell_count() const { return n_cells_x * n_cells_y; }
    int cell_index(int cx, int cy) const { return cy * n_cells_x + cx; }
    int elements_per_cell() const { return refinement * refinement; }
};

/// Boundary layout: fixed-pressure inlet/outlet segments on the left/right
/// edges, walls elsewhere, optional symmetry line along the bottom edge.
struct BoundarySpec {
    double p_in = 0.0;    ///< inlet static pressure [Pa]
    double p_out = 0.0;   ///< outlet static pressure [Pa]
    double T_in = 293.15; ///< inlet temperature [K]
    int inlet_j0 = 0, inlet_j1 = 0;    ///< inlet element rows [j0, j1) on the left edge
    int outlet_j0 = 0, outlet_j1 = 0;  ///< outlet element rows on the right edge
    bool bottom_symmetry = false;      ///< bottom edge is the symmetry line
    bool no_slip_walls = false;        ///< tangential wall condition (default: free slip)

    bool left_is_inlet(int j) const { return j >= inlet_j0 && j < inlet_j1; }
    bool right_is_outlet(int j) const { return j >= outlet_j0 && j < outlet_j1; }
    int inlet_rows() const { return inlet_j1 - inlet_j0; }
};

/// Two-field design: gamma1 (1 = void, 0 = lattice) and gamma2 (normalised
/// beam diameter), one value of each per unit cell.
struct DesignField {
    std::vector<double> gamma1;
    std::vector<double> gamma2;

    static DesignField constant(int n, double g1, double g2) {
        DesignField d;
        d.gamma1.assign(n, g1);
        d.gamma2.assign(n, g2);
        return d;
    }
    int size() const { return static_cast<int>(gamma1.size()); }
    void validate() const {
        if (gamma1.size() != gamma2.size())
            throw std::invalid_argument("DesignField: component size mismatch");
        for (double g : gamma1)
            if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("DesignField: gamma1 out of [0,1]");
        for (double g : gamma2)
            if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("DesignField: gamma2 out of [0,1]");
    }
};

/// Geometric/layout inputs of build_domain.
struct DomainSpec {
    double L_x = 0.05;
    double L_y = 0.05;
    double L_in = 5.0e-3;
    double cell_size = 2.5e-3;
    int refinement = 4;
    bool symmetry = true;
    int plenum_cells = 1;
    bool no_slip_walls = false;
    double P_in = 10.0;
    double T_in = 293.15;

    static DomainSpec from(const PhysicalParams& p) {
        DomainSpec s;
        s.L_x = p.L_x;
        s.L_y = p.L_y;
        s.L_in = p.L_in;
        s.T_in = p.T_in;
        return s;
    }
};

/// Mesh + design-cell layout + boundary layout of one analysis problem.
struct Domain {
    StructuredMesh mesh;
    UnitGrid grid;
    BoundarySpec bc;

    bool is_design_element(int e) const { return grid.cell_of_element[e] >= 0; }
    /// Area of the design footprint (the heated region).
    double design_area() const {
        return static_cast<double>(grid.cell_count()) * grid.cell_size * grid.cell_size;
    }
};

namespace detail {
inline bool divides(double whole, double part) {
    const double q = whole / part;
    return std::abs(q - std::round(q)) < 1e-9 * std::max(1.0, std::abs(q));
}
inline int ratio(double whole, double part) { return static_cast<int>(std::llround(whole / part)); }
} // namespace detail

/// Builds the structured analysis domain: plenum strip | design cells | plenum
/// strip along x, with the inlet/outlet openings centred on the y extent (or
/// straddling the symmetry line on the half domain).
inline Domain build_domain(const DomainSpec& spec) {
    if (spec.cell_size <= 0) throw std::invalid_argument("build_domain: cell_size must be > 0");
    if (spec.refinement < 1) throw std::invalid_argument("build_domain: refinement must be >= 1");
    if (spec.plenum_cells < 0) throw std::invalid_argument("build_domain: plenum_cells must be >= 0");
    if (!detail::divides(spec.L_x, spec.cell_size))
        throw std::invalid_argument("build_domain: cell_size does not divide L_x");
    if (!detail::divides(spec.L_y, spec.cell_size))
        throw std::invalid_argument("build_domain: cell_size does not divide L_y");
    if (spec.L_in > spec.L_y + 1e-12)
        throw std::invalid_argument("build_domain: inlet wider than the domain edge");

    Domain dom;
    UnitGrid& g = dom.grid;
    g.cell_size = spec.cell_size;
    g.refinement = spec.refinement;
    g.symmetry = spec.symmetry;
    g.plenum_cells = spec.plenum_cells;
    g.n_cells_x = detail::ratio(spec.L_x, spec.cell_size);

    const int full_cells_y = detail::ratio(spec.L_y, spec.cell_size);
    if (spec.symmetry) {
        if (full_cells_y % 2 != 0)
            throw std::invalid_argument("build_domain: symmetric half-domain needs an even cell count in y");
        if (!detail::divides(spec.L_in / 2.0, spec.L_y / full_cells_y / spec.refinement))
            throw std::invalid_argument("build_domain: half inlet width not aligned with the mesh");
        g.n_cells_y = full_cells_y / 2;
    } else {
        g.n_cells_y = full_cells_y;
    }

    StructuredMesh& m = dom.mesh;
    m.h = spec.cell_size / spec.refinement;
    m.nx = (g.n_cells_x + 2 * g.plenum_cells) * g.refinement;
    m.ny = g.n_cells_y * g.refinement;

    // Inlet/outlet rows. The opening is centred on the full width; on the
    // half domain it starts at the symmetry line (j = 0).
    BoundarySpec& bc = dom.bc;
    bc.p_in = spec.P_in;
    bc.p_out = 0.0;
    bc.T_in = spec.T_in;
    bc.bottom_symmetry = spec.symmetry;
    bc.no_slip_walls = spec.no_slip_walls;
    const double half_in = spec.L_in / 2.0;
    if (spec.symmetry) {
        if (!detail::divides(half_in, m.h))
            throw std::invalid_argument("build_domain: L_in/2 not aligned with the mesh");
        bc.inlet_j0 = 0;
        bc.inlet_j1 = detail::ratio(half_in, m.h);
    } else {
        const double y_lo = (spec.L_y - spec.L_in) / 2.0;
        if (!detail::divides(y_lo, m.h) || !detail::divides(spec.L_in, m.h))
            throw std::invalid_argument("build_domain: inlet not aligned with the mesh");
        bc.inlet_j0 = detail::ratio(y_lo, m.h);
        bc.inlet_j1 = bc.inlet_j0 + detail::ratio(spec.L_in, m.h);
    }
    bc.outlet_j0 = bc.inlet_j0;
    bc.outlet_j1 = bc.inlet_j1;

    // Element -> design cell map; plenum columns map to -1.
    g.cell_of_element.assign(static_cast<size_t>(m.cell_count()), -1);
    const int px = g.plenum_cells * g.refinement;  // plenum depth in elements
    for (int j = 0; j < m.ny; ++j) {
        const int cy = j / g.refinement;
        for (int i = 0; i < m.nx; ++i) {
            if (i < px || i >= px + g.n_cells_x * g.refinement) continue;
            const int cx = (i - px) / g.refinement;
            g.cell_of_element[static_cast<size_t>(m.cell(i, j))] = g.cell_index(cx, cy);
        }
    }
    return dom;
}

/// Per-element design values. Plenum elements carry pure-fluid values
/// (gamma1 = 1, gamma2 = 0).
struct ElementDesign {
    std::vector<double> gamma1;
    std::vector<double> gamma2;
};

inline ElementDesign distribute_design(const DesignField& d, const Domain& dom) {
    if (d.size() != dom.grid.cell_count())
        throw std::invalid_argument("distribute_design: design size does not match the grid");
    ElementDesign e;
    const int n = dom.mesh.cell_count();
    e.gamma1.assign(static_cast<size_t>(n), 1.0);
    e.gamma2.assign(static_cast<size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
        const int c = dom.grid.cell_of_element[static_cast<size_t>(k)];
        if (c < 0) continue;
        e.gamma1[static_cast<size_t>(k)] = d.gamma1[static_cast<size_t>(c)];
        e.gamma2[static_cast<size_t>(k)] = d.gamma2[static_cast<size_t>(c)];
    }
    return e;
}

/// Collapses a per-element sensitivity field onto the design cells by
/// summation (the element values of one cell all track the same variable).
inline std::vector<double> reduce_sensitivity(const std::vector<double>& per_element, const Domain& dom) {
    if (static_cast<int>(per_element.size()) != dom.mesh.cell_count())
        throw std::invalid_argument("reduce_sensitivity: field size does not match the mesh");
    std::vector<double> per_cell(static_cast<size_t>(dom.grid.cell_count()), 0.0);
    for (int e = 0; e < dom.mesh.cell_count(); ++e) {
        const int c = dom.grid.cell_of_element[static_cast<size_t>(e)];
        if (c >= 0) per_cell[static_cast<size_t>(c)] += per_element[static_cast<size_t>(e)];
    }
    return per_cell;
}

/// Per-cell average of a per-element field (the inverse of distribution).
inline std::vector<double> average_to_cells(const std::vector<double>& per_element, const Domain& dom) {
    std::vector<double> per_cell = reduce_sensitivity(per_element, dom);
    const double inv = 1.0 / dom.grid.elements_per_cell();
    for (double& v : per_cell) v *= inv;
    return per_cell;
}

} // namespace lattopt
