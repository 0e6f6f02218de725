#pragma once

// Full-scale BCC lattice reconstruction: every retained design cell becomes
// a stack of unit cells with 8 half-diagonal struts from the cell centre to
// its corners, with corner nodes merged between neighbours.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lattopt/grid.hpp"
#include "lattopt/properties.hpp"

namespace lattopt {

struct Vec3 {
    double x = 0, y = 0, z = 0;
    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

struct Strut {
    int node_a = 0;
    int node_b = 0;
    double diameter = 0.0;
    int cell = -1;  ///< design-cell provenance
};

struct BeamGraph {
    std::vector<Vec3> nodes;
    std::vector<Strut> struts;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int strut_count() const { return static_cast<int>(struts.size()); }
};

namespace detail {

/// Node dedup on a quantised coordinate key (merge tolerance 1e-9 m).
class NodeMerger {
public:
    int add(BeamGraph& g, const Vec3& p) {
        const auto key = std::array<long long, 3>{quant(p.x), quant(p.y), quant(p.z)};
        auto it = index_.find(key);
        if (it != index_.end()) return it->second;
        g.nodes.push_back(p);
        const int id = g.node_count() - 1;
        index_.emplace(key, id);
        return id;
    }

private:
    static long long quant(double v) { return std::llround(v * 1e9); }
    std::map<std::array<long long, 3>, int> index_;
};

} // namespace detail

/// Rebuilds the full-scale lattice from a design. Cells with projected
/// gamma1 below the threshold become lattice; half-domain designs are
/// mirrored about the symmetry line first. Diameters follow the affine
/// gamma2 map of the table.
inline BeamGraph reconstruct_lattice(const DesignField& d, const LatticePropertyTable& table,
                                     const UnitGrid& grid, int n_layers_z, double threshold = 0.5) {
    if (d.size() != grid.cell_count())
        throw std::invalid_argument("reconstruct_lattice: design size mismatch");
    if (n_layers_z < 1) throw std::invalid_argument("reconstruct_lattice: need >= 1 layer");

    // Expand to the full width: rows are appended mirror-first so y=0 stays
    // the footprint edge.
    const int nx = grid.n_cells_x;
    const int ny_half = grid.n_cells_y;
    const int ny = grid.symmetry ? 2 * ny_half : ny_half;
    std::vector<double> g1(static_cast<size_t>(nx) * ny), g2(static_cast<size_t>(nx) * ny);
    std::vector<int> src_cell(static_cast<size_t>(nx) * ny);
    for (int cy = 0; cy < ny; ++cy)
        for (int cx = 0; cx < nx; ++cx) {
            int src_cy = cy;
            if (grid.symmetry) src_cy = cy < ny_half ? (ny_half - 1 - cy) : (cy - ny_half);
            const int src = grid.cell_index(cx, src_cy);
            g1[static_cast<size_t>(cy) * nx + cx] = d.gamma1[static_cast<size_t>(src)];
            g2[static_cast<size_t>(cy) * nx + cx] = d.gamma2[static_cast<size_t>(src)];
            src_cell[static_cast<size_t>(cy) * nx + cx] = src;
        }

    BeamGraph g;
    detail::NodeMerger merger;
    const double L = grid.cell_size;
    for (int cy = 0; cy < ny; ++cy) {
        for (int cx = 0; cx < nx; ++cx) {
            const size_t c = static_cast<size_t>(cy) * nx + cx;
            if (!(g1[c] < threshold)) continue;  // void cell
            const double dia = table.d_min() + g2[c] * (table.d_max() - table.d_min());
            for (int cz = 0; cz < n_layers_z; ++cz) {
                const Vec3 o{cx * L, cy * L, cz * L};
                const Vec3 centre = o + Vec3{L / 2, L / 2, L / 2};
                const int ic = merger.add(g, centre);
                for (int dz = 0; dz <= 1; ++dz)
                    for (int dy = 0; dy <= 1; ++dy)
                        for (int dx = 0; dx <= 1; ++dx) {
                            const int corner = merger.add(g, o + Vec3{dx * L, dy * L, dz * L});
                            g.struts.push_back({ic, corner, dia, src_cell[c]});
                        }
            }
        }
    }
    return g;
}

/// Beam list CSV: xa,ya,za,xb,yb,zb,d with full double precision.
inline void export_beams(const BeamGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_beams: cannot open " + path);
    out << "xa,ya,za,xb,yb,zb,d\n";
    char line[256];
    for (const Strut& s : g.struts) {
        const Vec3& a = g.nodes[static_cast<size_t>(s.node_a)];
        const Vec3& b = g.nodes[static_cast<size_t>(s.node_b)];
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", a.x, a.y, a.z, b.x,
                      b.y, b.z, s.diameter);
        out << line;
    }
}

/// Rebuilds a graph from a beam CSV (nodes re-merged at the same tolerance).
inline BeamGraph import_beams(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("import_beams: cannot open " + path);
    std::string header;
    std::getline(in, header);
    if (header != "xa,ya,za,xb,yb,zb,d")
        throw std::invalid_argument("import_beams: unexpected header in " + path);
    BeamGraph g;
    detail::NodeMerger merger;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double v[7];
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3], &v[4], &v[5],
                        &v[6]) != 7)
            throw std::invalid_argument("import_beams: malformed row: " + line);
        const int a = merger.add(g, {v[0], v[1], v[2]});
        const int b = merger.add(g, {v[3], v[4], v[5]});
        g.struts.push_back({a, b, v[6], -1});
    }
    return g;
}

/// Triangle count of one capped prism with the given facet count.
inline int strut_triangle_count(int sides) { return 2 * sides + 2 * (sides - 2); }

/// Binary little-endian STL; every strut becomes a capped prism with `sides`
/// facets around its axis.
inline void export_stl(const BeamGraph& g, int sides, const std::string& path) {
    if (g.struts.empty()) throw std::invalid_argument("export_stl: empty beam graph");
    if (sides < 3) throw std::invalid_argument("export_stl: need >= 3 facets");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_stl: cannot open " + path);

    char header[80] = {};
    std::snprintf(header, sizeof(header), "lattice beam export");
    out.write(header, 80);
    const std::uint32_t n_tri = static_cast<std::uint32_t>(g.strut_count()) *
                                static_cast<std::uint32_t>(strut_triangle_count(sides));
    out.write(reinterpret_cast<const char*>(&n_tri), 4);

    auto write_tri = [&](const Vec3& a, const Vec3& b, const Vec3& c) {
        const Vec3 n = cross(b - a, c - a);
        const double ln = n.norm();
        const Vec3 nn = ln > 0 ? n * (1.0 / ln) : Vec3{0, 0, 1};
        float buf[12] = {static_cast<float>(nn.x), static_cast<float>(nn.y), static_cast<float>(nn.z),
                         static_cast<float>(a.x),  static_cast<float>(a.y),  static_cast<float>(a.z),
                         static_cast<float>(b.x),  static_cast<float>(b.y),  static_cast<float>(b.z),
                         static_cast<float>(c.x),  static_cast<float>(c.y),  static_cast<float>(c.z)};
        out.write(reinterpret_cast<const char*>(buf), 48);
        const std::uint16_t attr = 0;
        out.write(reinterpret_cast<const char*>(&attr), 2);
    };

    for (const Strut& s : g.struts) {
        const Vec3& a = g.nodes[static_cast<size_t>(s.node_a)];
        const Vec3& b = g.nodes[static_cast<size_t>(s.node_b)];
        Vec3 axis = b - a;
        const double len = axis.norm();
        if (len <= 0) continue;
        axis = axis * (1.0 / len);
        const Vec3 ref = std::abs(axis.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
        Vec3 n1 = cross(ref, axis);
        n1 = n1 * (1.0 / n1.norm());
        const Vec3 n2 = cross(axis, n1);
        const double r = s.diameter / 2.0;
        std::vector<Vec3> ra(static_cast<size_t>(sides)), rb(static_cast<size_t>(sides));
        for (int k = 0; k < sides; ++k) {
            const double th = 2.0 * M_PI * k / sides;
            const Vec3 off = n1 * (r * std::cos(th)) + n2 * (r * std::sin(th));
            ra[static_cast<size_t>(k)] = a + off;
            rb[static_cast<size_t>(k)] = b + off;
        }
        for (int k = 0; k < sides; ++k) {
            const int k1 = (k + 1) % sides;
            write_tri(ra[static_cast<size_t>(k)], rb[static_cast<size_t>(k)], rb[static_cast<size_t>(k1)]);
            write_tri(ra[static_cast<size_t>(k)], rb[static_cast<size_t>(k1)], ra[static_cast<size_t>(k1)]);
        }
        for (int k = 1; k + 1 < sides; ++k) {
            write_tri(ra[0], ra[static_cast<size_t>(k + 1)], ra[static_cast<size_t>(k)]);  // bottom cap
            write_tri(rb[0], rb[static_cast<size_t>(k)], rb[static_cast<size_t>(k + 1)]);  // top cap
        }
    }
}

} // namespace lattopt
