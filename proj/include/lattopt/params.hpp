#pragma once

#include <stdexcept>
#include <string>

namespace lattopt {

/// Physical constants of the working fluid, the lattice solid, and the
/// reduced two-layer stack. Thicknesses are stored as half-thicknesses
/// (H_t, H_b) because the governing equations are written in those terms.
struct PhysicalParams {
    double mu_f  = 1.004e-3;  ///< fluid dynamic viscosity [Pa s]
    double rho_f = 998.0;     ///< fluid density [kg/m^3]
    double k_f   = 0.598;     ///< fluid thermal conductivity [W/(m K)]
    double c_pf  = 4180.0;    ///< fluid specific heat [J/(kg K)]
    double k_s   = 100.0;     ///< solid conductivity [W/(m K)]
    double rho_s = 2000.0;    ///< solid density [kg/m^3] (unused in the steady model)
    double c_ps  = 900.0;     ///< solid specific heat [J/(kg K)] (unused in the steady model)
    double q_s   = 1.0e5;     ///< heat flux under the design footprint [W/m^2]
    double T_in  = 293.15;    ///< inlet fluid temperature [K]
    double H_t   = 2.5e-3;    ///< half thickness of the thermal-fluid layer [m]
    double H_b   = 0.5e-3;    ///< half thickness of the base plate [m]
    double L_x   = 0.05;      ///< design-domain extent along the flow [m]
    double L_y   = 0.05;      ///< design-domain extent across the flow [m]
    double L_in  = 5.0e-3;    ///< inlet (and outlet) opening width [m]

    /// Viscous drag coefficient of the bare channel, 3 mu_f / H_t^2.
    double alpha_fluid() const { return 3.0 * mu_f / (H_t * H_t); }

    void validate() const {
        auto pos = [](double v, const char* name) {
            if (!(v > 0.0))
                throw std::invalid_argument(std::string("PhysicalParams: ") + name + " must be > 0");
        };
        pos(mu_f, "mu_f"); pos(rho_f, "rho_f"); pos(k_f, "k_f"); pos(c_pf, "c_pf");
        pos(k_s, "k_s"); pos(rho_s, "rho_s"); pos(c_ps, "c_ps");
        pos(T_in, "T_in"); pos(H_t, "H_t"); pos(H_b, "H_b");
        pos(L_x, "L_x"); pos(L_y, "L_y"); pos(L_in, "L_in");
        if (q_s < 0.0) throw std::invalid_argument("PhysicalParams: q_s must be >= 0");
    }
};

} // namespace lattopt
