#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lattopt/flow.hpp"
#include "lattopt/grid.hpp"
#include "lattopt/properties.hpp"

namespace lattopt {

namespace io {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double to_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
}

} // namespace io

// ---------------------------------------------------------------------------
// Design CSV: ix,iy,gamma1,gamma2 (one row per design cell)
// ---------------------------------------------------------------------------

inline void save_design_csv(const std::string& path, const DesignField& d, const UnitGrid& grid) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "ix,iy,gamma1,gamma2\n";
    for (int cy = 0; cy < grid.n_cells_y; ++cy)
        for (int cx = 0; cx < grid.n_cells_x; ++cx) {
            const int c = grid.cell_index(cx, cy);
            out << cx << ',' << cy << ',' << io::fmt(d.gamma1[static_cast<size_t>(c)]) << ','
                << io::fmt(d.gamma2[static_cast<size_t>(c)]) << '\n';
        }
}

inline DesignField load_design_csv(const std::string& path, const UnitGrid& grid) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || io::trim(line) != "ix,iy,gamma1,gamma2")
        throw std::invalid_argument("design CSV: bad header in " + path);
    DesignField d = DesignField::constant(grid.cell_count(), -1.0, 0.0);
    int rows = 0;
    while (std::getline(in, line)) {
        if (io::trim(line).empty()) continue;
        const auto f = io::split(io::trim(line), ',');
        if (f.size() != 4) throw std::invalid_argument("design CSV: malformed row: " + line);
        const int cx = static_cast<int>(io::to_double(f[0]));
        const int cy = static_cast<int>(io::to_double(f[1]));
        if (cx < 0 || cx >= grid.n_cells_x || cy < 0 || cy >= grid.n_cells_y)
            throw std::invalid_argument("design CSV: cell index out of range: " + line);
        const int c = grid.cell_index(cx, cy);
        d.gamma1[static_cast<size_t>(c)] = io::to_double(f[2]);
        d.gamma2[static_cast<size_t>(c)] = io::to_double(f[3]);
        ++rows;
    }
    if (rows != grid.cell_count())
        throw std::invalid_argument("design CSV: expected " + std::to_string(grid.cell_count()) + " rows, got " +
                                    std::to_string(rows));
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------
// Property table CSV: gamma2,eps_por,k_por,alpha_por,beta_por
// ---------------------------------------------------------------------------

inline void save_property_table_csv(const std::string& path, const LatticePropertyTable& t) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "gamma2,eps_por,k_por,alpha_por,beta_por\n";
    for (const auto& s : t.samples())
        out << io::fmt(s.gamma2) << ',' << io::fmt(s.eps_por) << ',' << io::fmt(s.k_por) << ','
            << io::fmt(s.alpha_por) << ',' << io::fmt(s.beta_por) << '\n';
}

inline LatticePropertyTable load_property_table_csv(const std::string& path, double d_min, double d_max) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || io::trim(line) != "gamma2,eps_por,k_por,alpha_por,beta_por")
        throw std::invalid_argument("property CSV: bad header in " + path);
    std::vector<PropertySample> rows;
    while (std::getline(in, line)) {
        if (io::trim(line).empty()) continue;
        const auto f = io::split(io::trim(line), ',');
        if (f.size() != 5) throw std::invalid_argument("property CSV: malformed row: " + line);
        rows.push_back({io::to_double(f[0]), io::to_double(f[1]), io::to_double(f[2]), io::to_double(f[3]),
                        io::to_double(f[4])});
    }
    return LatticePropertyTable(std::move(rows), d_min, d_max);
}

// ---------------------------------------------------------------------------
// Darcy-Forchheimer fit samples: vbar,neg_dpdx
// ---------------------------------------------------------------------------

inline std::vector<std::pair<double, double>> load_df_samples_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || io::trim(line) != "vbar,neg_dpdx")
        throw std::invalid_argument("DF sample CSV: bad header in " + path);
    std::vector<std::pair<double, double>> rows;
    while (std::getline(in, line)) {
        if (io::trim(line).empty()) continue;
        const auto f = io::split(io::trim(line), ',');
        if (f.size() != 2) throw std::invalid_argument("DF sample CSV: malformed row: " + line);
        rows.emplace_back(io::to_double(f[0]), io::to_double(f[1]));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// RVE sample CSV for fit-props:
//   gamma2,eps_por,q,L,dT,vbar,neg_dpdx
// One row per flow sample; the porosity and conduction columns repeat within
// each gamma2 group and must agree.
// ---------------------------------------------------------------------------

struct RveSampleRow {
    double gamma2, eps_por, q, L, dT, vbar, neg_dpdx;
};

inline std::vector<RveSampleRow> load_rve_samples_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || io::trim(line) != "gamma2,eps_por,q,L,dT,vbar,neg_dpdx")
        throw std::invalid_argument("RVE sample CSV: bad header in " + path);
    std::vector<RveSampleRow> rows;
    while (std::getline(in, line)) {
        if (io::trim(line).empty()) continue;
        const auto f = io::split(io::trim(line), ',');
        if (f.size() != 7) throw std::invalid_argument("RVE sample CSV: malformed row: " + line);
        rows.push_back({io::to_double(f[0]), io::to_double(f[1]), io::to_double(f[2]), io::to_double(f[3]),
                        io::to_double(f[4]), io::to_double(f[5]), io::to_double(f[6])});
    }
    if (rows.empty()) throw std::invalid_argument("RVE sample CSV: no data rows in " + path);
    return rows;
}

// ---------------------------------------------------------------------------
// Legacy-VTK structured-points export of cell fields.
// ---------------------------------------------------------------------------

struct VtkCellField {
    std::string name;
    const std::vector<double>* scalar = nullptr;            ///< one of scalar ...
    const std::vector<double>* vx = nullptr;                ///< ... or a 2D vector
    const std::vector<double>* vy = nullptr;
};

inline void write_vtk_cell_fields(const std::string& path, const StructuredMesh& m,
                                  const std::vector<VtkCellField>& fields) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "# vtk DataFile Version 3.0\n";
    out << "structured cell fields\n";
    out << "ASCII\n";
    out << "DATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << m.nx + 1 << ' ' << m.ny + 1 << " 1\n";
    out << "ORIGIN 0 0 0\n";
    out << "SPACING " << io::fmt(m.h) << ' ' << io::fmt(m.h) << ' ' << io::fmt(m.h) << '\n';
    out << "CELL_DATA " << m.cell_count() << '\n';
    char buf[64];
    for (const auto& f : fields) {
        if (f.scalar) {
            out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : *f.scalar) {
                std::snprintf(buf, sizeof(buf), "%.9g\n", v);
                out << buf;
            }
        } else if (f.vx && f.vy) {
            out << "VECTORS " << f.name << " double\n";
            for (size_t i = 0; i < f.vx->size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%.9g %.9g 0\n", (*f.vx)[i], (*f.vy)[i]);
                out << buf;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Flat sectioned key=value configuration text.
// ---------------------------------------------------------------------------

struct ConfigEntry {
    std::string section, key, value;
};

inline std::vector<ConfigEntry> parse_config_text(const std::string& text) {
    std::vector<ConfigEntry> out;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = io::trim(line);
        const auto hash = t.find('#');
        if (hash != std::string::npos) t = io::trim(t.substr(0, hash));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw std::invalid_argument("config line " + std::to_string(lineno) + ": malformed section");
            section = io::trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        out.push_back({section, io::trim(t.substr(0, eq)), io::trim(t.substr(eq + 1))});
    }
    return out;
}

inline bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw std::invalid_argument("not a boolean: '" + v + "'");
}

inline std::vector<double> parse_double_list(const std::string& v) {
    std::vector<double> out;
    for (const std::string& part : io::split(v, ','))
        if (!io::trim(part).empty()) out.push_back(io::to_double(io::trim(part)));
    return out;
}

inline std::string format_double_list(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += io::fmt(v[i]);
    }
    return out;
}

} // namespace lattopt
