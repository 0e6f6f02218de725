#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lattopt/adjoint.hpp"
#include "lattopt/flow.hpp"
#include "lattopt/grid.hpp"
#include "lattopt/properties.hpp"
#include "lattopt/thermal.hpp"

namespace lattopt {

/// Headline performance numbers of one evaluated design.
struct MetricsReport {
    double Nu_max = 0.0;
    double Nu_obj = 0.0;
    double Nu_ave = 0.0;
    double u_in = 0.0;          ///< mean inlet velocity [m/s]
    double Mnd = 0.0;           ///< non-discreteness [%]
    double solid_fraction = 0.0;
    double K = 0.0;             ///< p-norm temperature rise [K]
};

struct NusseltTriple {
    double Nu_max = 0.0, Nu_obj = 0.0, Nu_ave = 0.0;
};

/// Nusselt metrics over the heated footprint. The two-layer model carries
/// the base-plate centre temperature; with_bottom_offset shifts it by
/// q_s*H_b/k_s to estimate the bottom-surface value.
inline NusseltTriple nusselt_metrics(const ThermalState& t, const PhysicalParams& phys, const Domain& dom,
                                     double p_norm, bool with_bottom_offset = true) {
    if (!(phys.q_s > 0.0)) throw std::invalid_argument("nusselt_metrics: q_s must be > 0");
    const StructuredMesh& m = dom.mesh;
    const double offset = with_bottom_offset ? phys.q_s * phys.H_b / phys.k_s : 0.0;
    double t_max = -1e300, acc_p = 0.0, acc_mean = 0.0, area = 0.0;
    for (int e = 0; e < m.cell_count(); ++e) {
        if (!dom.is_design_element(e)) continue;
        const double Tb = t.Tb0[static_cast<size_t>(e)] + offset;
        const double dT = std::max(Tb - phys.T_in, 0.0);
        t_max = std::max(t_max, Tb);
        acc_p += std::pow(dT, p_norm) * m.cell_area();
        acc_mean += dT * m.cell_area();
        area += m.cell_area();
    }
    if (area <= 0.0) throw std::invalid_argument("nusselt_metrics: empty heated footprint");
    const double dT_max = t_max - phys.T_in;
    if (!(dT_max > 0.0)) throw std::invalid_argument("nusselt_metrics: no temperature rise");
    const double K = std::pow(acc_p / area, 1.0 / p_norm);
    const double dT_ave = acc_mean / area;
    const double scale = phys.L_in / phys.k_f;
    NusseltTriple n;
    n.Nu_max = phys.q_s / dT_max * scale;
    n.Nu_obj = phys.q_s / K * scale;
    n.Nu_ave = phys.q_s / dT_ave * scale;
    return n;
}

/// Measure of non-discreteness, in percent. 0 for a binary field.
inline double mnd(const std::vector<double>& gamma1) {
    if (gamma1.empty()) throw std::invalid_argument("mnd: empty field");
    double s = 0.0;
    for (double g : gamma1) s += 4.0 * g * (1.0 - g);
    return 100.0 * s / static_cast<double>(gamma1.size());
}

/// Fields comparable with a resolved 3D simulation at the channel centre
/// plane: velocity scaled by 3/2 and the profile-weighted temperature.
struct CenterPlaneFields {
    std::vector<double> V0x, V0y;      ///< centre-plane velocity components
    std::vector<double> T_center;      ///< centre-plane fluid temperature
};

inline CenterPlaneFields center_plane_fields(const FlowState& f, const ThermalState& t, const Domain& dom,
                                             const PhysicalParams& phys, const std::vector<double>& q_e) {
    const StructuredMesh& m = dom.mesh;
    CenterPlaneFields out;
    cell_velocity(f, m, out.V0x, out.V0y);
    for (double& v : out.V0x) v *= 1.5;
    for (double& v : out.V0y) v *= 1.5;
    out.T_center.resize(static_cast<size_t>(m.cell_count()));
    for (int e = 0; e < m.cell_count(); ++e) {
        const double Tw = t.Tb0[static_cast<size_t>(e)] - q_e[static_cast<size_t>(e)] * phys.H_b / phys.k_s;
        out.T_center[static_cast<size_t>(e)] =
            (455.0 * t.T0[static_cast<size_t>(e)] - 39.0 * Tw) / 416.0;
    }
    return out;
}

/// Solid fraction of the design footprint, (1/A) * integral of (1 - eps).
inline double solid_fraction(const DesignField& d, const LatticePropertyTable& table, const Domain& dom,
                             const ProjectionParams& proj) {
    const int nc = dom.grid.cell_count();
    if (d.size() != nc) throw std::invalid_argument("solid_fraction: design size mismatch");
    double s = 0.0;
    for (int c = 0; c < nc; ++c) {
        const double g1h = heaviside_project(d.gamma1[static_cast<size_t>(c)], proj).first;
        s += (1.0 - table.eps(d.gamma2[static_cast<size_t>(c)])) * (1.0 - g1h);
    }
    return s / nc;
}

/// Dimensionless temperature-defect profile across the fluid layer,
/// (T_w - T(z))/(T_w - T0). Zero at the heated wall z = -H_t; 455/416 at the
/// centre plane. Its bulk-velocity-weighted mean over the layer is 1.
inline double temperature_defect_profile(double z, double H_t) {
    const double s = z / H_t;
    return 35.0 / 416.0 * (13.0 + 8.0 * s - 6.0 * s * s + s * s * s * s);
}

/// Parabolic through-thickness velocity shape, v(z)/vbar.
inline double velocity_profile_factor(double z, double H_t) {
    const double s = z / H_t;
    return 1.5 * (1.0 - s * s);
}

/// Standard Pearson correlation coefficient.
inline double pearson_correlation(const std::vector<std::pair<double, double>>& pairs) {
    const size_t n = pairs.size();
    if (n < 3) throw std::invalid_argument("pearson_correlation: need >= 3 pairs");
    double mx = 0, my = 0;
    for (const auto& [x, y] : pairs) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (const auto& [x, y] : pairs) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw std::invalid_argument("pearson_correlation: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

} // namespace lattopt
