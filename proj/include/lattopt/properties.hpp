#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lattopt/params.hpp"

namespace lattopt {

/// Monotone piecewise-cubic interpolant (Fritsch-Carlson slope limiting).
/// Preserves monotonicity of the sample data and is C1, so its derivative
/// is safe to use in sensitivity chains.
class MonotoneCubic {
public:
    MonotoneCubic() = default;

    MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw std::invalid_argument("MonotoneCubic: need >= 2 samples");
        for (size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("MonotoneCubic: abscissae must increase");
        slopes_.assign(n, 0.0);
        std::vector<double> d(n - 1);
        for (size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        slopes_[0] = d[0];
        slopes_[n - 1] = d[n - 2];
        for (size_t i = 1; i + 1 < n; ++i) {
            if (d[i - 1] * d[i] <= 0.0) {
                slopes_[i] = 0.0;
            } else {
                // Weighted harmonic mean keeps the interpolant monotone.
                const double w1 = 2.0 * (x_[i + 1] - x_[i]) + (x_[i] - x_[i - 1]);
                const double w2 = (x_[i + 1] - x_[i]) + 2.0 * (x_[i] - x_[i - 1]);
                slopes_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        // Endpoint limiting (three-point estimate clipped to 3x the secant).
        for (size_t i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) {
                slopes_[i] = slopes_[i + 1] = 0.0;
            } else {
                slopes_[i] = std::clamp(slopes_[i], std::min(0.0, 3.0 * d[i]), std::max(0.0, 3.0 * d[i]));
                slopes_[i + 1] = std::clamp(slopes_[i + 1], std::min(0.0, 3.0 * d[i]), std::max(0.0, 3.0 * d[i]));
            }
        }
    }

    double value(double x) const { return eval(x).first; }
    double derivative(double x) const { return eval(x).second; }

    std::pair<double, double> eval(double x) const {
        const size_t n = x_.size();
        x = std::clamp(x, x_.front(), x_.back());
        size_t k = static_cast<size_t>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
        k = std::clamp<size_t>(k, 1, n - 1) - 1;
        const double hx = x_[k + 1] - x_[k];
        const double t = (x - x_[k]) / hx;
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
        const double h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t);
        const double h11 = t * t * (t - 1);
        const double v = h00 * y_[k] + h10 * hx * slopes_[k] + h01 * y_[k + 1] + h11 * hx * slopes_[k + 1];
        const double dh00 = 6 * t * t - 6 * t;
        const double dh10 = 3 * t * t - 4 * t + 1;
        const double dh01 = -dh00;
        const double dh11 = 3 * t * t - 2 * t;
        const double dv = (dh00 * y_[k] + dh01 * y_[k + 1]) / hx + dh10 * slopes_[k] + dh11 * slopes_[k + 1];
        return {v, dv};
    }

private:
    std::vector<double> x_, y_, slopes_;
};

/// One sampled row of the lattice property curves.
struct PropertySample {
    double gamma2 = 0.0;
    double eps_por = 0.0;    ///< porosity [-]
    double k_por = 0.0;      ///< effective conductivity [W/(m K)]
    double alpha_por = 0.0;  ///< Darcy coefficient [Pa s/m^2]
    double beta_por = 0.0;   ///< Forchheimer coefficient [Pa s^2/m^3]
};

/// Effective lattice properties versus normalised beam diameter, with
/// monotone interpolation over gamma2 in [0,1].
class LatticePropertyTable {
public:
    LatticePropertyTable() = default;

    LatticePropertyTable(std::vector<PropertySample> samples, double d_min, double d_max)
        : samples_(std::move(samples)), d_min_(d_min), d_max_(d_max) {
        validate();
        std::vector<double> g, e, k, a, b;
        for (const auto& s : samples_) {
            g.push_back(s.gamma2);
            e.push_back(s.eps_por);
            k.push_back(s.k_por);
            a.push_back(s.alpha_por);
            b.push_back(s.beta_por);
        }
        eps_ = MonotoneCubic(g, e);
        k_ = MonotoneCubic(g, k);
        alpha_ = MonotoneCubic(g, a);
        beta_ = MonotoneCubic(std::move(g), b);
    }

    const std::vector<PropertySample>& samples() const { return samples_; }
    double d_min() const { return d_min_; }
    double d_max() const { return d_max_; }

    double eps(double g2) const { return eps_.value(g2); }
    double k(double g2) const { return k_.value(g2); }
    double alpha(double g2) const { return alpha_.value(g2); }
    double beta(double g2) const { return beta_.value(g2); }
    double deps(double g2) const { return eps_.derivative(g2); }
    double dk(double g2) const { return k_.derivative(g2); }
    double dalpha(double g2) const { return alpha_.derivative(g2); }
    double dbeta(double g2) const { return beta_.derivative(g2); }

    void validate() const {
        if (samples_.size() < 2) throw std::invalid_argument("property table: need >= 2 samples");
        if (!(d_min_ > 0.0) || !(d_max_ > d_min_))
            throw std::invalid_argument("property table: need 0 < d_min < d_max");
        const double tol = 1e-12;
        if (std::abs(samples_.front().gamma2) > tol || std::abs(samples_.back().gamma2 - 1.0) > tol)
            throw std::invalid_argument("property table: gamma2 samples must span [0,1]");
        for (size_t i = 0; i < samples_.size(); ++i) {
            const auto& s = samples_[i];
            if (!(s.eps_por > 0.0 && s.eps_por < 1.0))
                throw std::invalid_argument("property table: eps_por must lie in (0,1)");
            if (!(s.k_por > 0.0 && s.alpha_por > 0.0 && s.beta_por > 0.0))
                throw std::invalid_argument("property table: k/alpha/beta must be positive");
            if (i > 0) {
                const auto& q = samples_[i - 1];
                if (!(s.gamma2 > q.gamma2))
                    throw std::invalid_argument("property table: gamma2 samples must increase");
                if (s.eps_por > q.eps_por + tol)
                    throw std::invalid_argument("property table: eps_por must be non-increasing");
                if (s.k_por < q.k_por - tol || s.alpha_por < q.alpha_por - tol || s.beta_por < q.beta_por - tol)
                    throw std::invalid_argument("property table: k/alpha/beta must be non-decreasing");
            }
        }
    }

private:
    std::vector<PropertySample> samples_;
    double d_min_ = 0.3e-3;
    double d_max_ = 1.3e-3;
    MonotoneCubic eps_, k_, alpha_, beta_;
};

/// Affine map between beam diameter and the normalised design variable.
inline double gamma2_from_diameter(double d, const LatticePropertyTable& t) {
    if (d < t.d_min() - 1e-12 || d > t.d_max() + 1e-12)
        throw std::invalid_argument("gamma2_from_diameter: diameter outside [d_min, d_max]");
    return (d - t.d_min()) / (t.d_max() - t.d_min());
}

inline double diameter_from_gamma2(double g2, const LatticePropertyTable& t) {
    if (g2 < -1e-12 || g2 > 1.0 + 1e-12)
        throw std::invalid_argument("diameter_from_gamma2: gamma2 outside [0,1]");
    return t.d_min() + g2 * (t.d_max() - t.d_min());
}

/// Least-squares fit of -dp/dx = alpha*v + beta*v^2 through the origin,
/// with the coefficients clamped non-negative (active-set on the 2x2
/// normal equations).
inline std::pair<double, double> fit_darcy_forchheimer(const std::vector<std::pair<double, double>>& samples) {
    if (samples.size() < 2) throw std::invalid_argument("fit_darcy_forchheimer: need >= 2 samples");
    double s2 = 0, s3 = 0, s4 = 0, sy1 = 0, sy2 = 0;
    double vmin = samples.front().first, vmax = vmin;
    for (const auto& [v, y] : samples) {
        if (!(v > 0.0)) throw std::invalid_argument("fit_darcy_forchheimer: velocities must be positive");
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
        const double v2 = v * v;
        s2 += v2;
        s3 += v2 * v;
        s4 += v2 * v2;
        sy1 += v * y;
        sy2 += v2 * y;
    }
    if (vmax - vmin < 1e-14 * vmax)
        throw std::invalid_argument("fit_darcy_forchheimer: samples are degenerate (identical velocities)");

    const double det = s2 * s4 - s3 * s3;
    double alpha = (s4 * sy1 - s3 * sy2) / det;
    double beta = (s2 * sy2 - s3 * sy1) / det;
    if (alpha >= 0.0 && beta >= 0.0) return {alpha, beta};

    // Clamped alternatives: keep whichever single-coefficient fit has the
    // smaller residual.
    const double a_only = std::max(0.0, sy1 / s2);
    const double b_only = std::max(0.0, sy2 / s4);
    auto sse = [&](double a, double b) {
        double r = 0;
        for (const auto& [v, y] : samples) {
            const double e = y - a * v - b * v * v;
            r += e * e;
        }
        return r;
    };
    return sse(a_only, 0.0) <= sse(0.0, b_only) ? std::make_pair(a_only, 0.0) : std::make_pair(0.0, b_only);
}

/// Effective conductivity of an RVE from its through-flux response, plus the
/// dimensionless conductivity m_k.
inline std::pair<double, double> effective_conductivity_from_rve(double q, double L, double dT, double k_f,
                                                                 double k_s) {
    if (!(dT > 0.0)) throw std::invalid_argument("effective_conductivity_from_rve: dT must be > 0");
    if (!(L > 0.0)) throw std::invalid_argument("effective_conductivity_from_rve: L must be > 0");
    const double k_por = q * L / dT;
    const double m_k = (k_por - k_f) / (k_s - k_f);
    return {k_por, m_k};
}

/// Smoothed Heaviside projection parameters.
struct ProjectionParams {
    double beta = 1.0;
    double eta = 0.5;
    void validate() const {
        if (!(beta > 0.0)) throw std::invalid_argument("ProjectionParams: beta must be > 0");
        if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("ProjectionParams: eta must lie in (0,1)");
    }
};

/// Projected density and its derivative d(projected)/d(gamma1).
inline std::pair<double, double> heaviside_project(double g1, const ProjectionParams& p) {
    const double denom = std::tanh(p.beta * p.eta) + std::tanh(p.beta * (1.0 - p.eta));
    const double th = std::tanh(p.beta * (g1 - p.eta));
    const double value = (std::tanh(p.beta * p.eta) + th) / denom;
    const double deriv = p.beta * (1.0 - th * th) / denom;
    return {value, deriv};
}

/// Interpolated per-element material properties and their partial
/// derivatives with respect to the (projected) design variables.
struct InterpolatedProps {
    double eps = 1.0, k = 0.0, alpha = 0.0, beta = 0.0;
    double deps_dg1 = 0.0, dk_dg1 = 0.0, dalpha_dg1 = 0.0, dbeta_dg1 = 0.0;
    double deps_dg2 = 0.0, dk_dg2 = 0.0, dalpha_dg2 = 0.0, dbeta_dg2 = 0.0;
};

/// Extended-RAMP interpolation between fluid and porous property endpoints.
/// Porosity interpolates linearly; conductivity uses convexity q_k, the two
/// flow-resistance coefficients use q_f. g1h is the projected gamma1.
inline InterpolatedProps interpolate_properties(double g1h, double g2, const LatticePropertyTable& table,
                                                double q_k, double q_f, const PhysicalParams& phys) {
    InterpolatedProps r;
    const double alpha_f = phys.alpha_fluid();
    const double beta_f = 0.0;

    const auto [eps_p, deps_p] = std::make_pair(table.eps(g2), table.deps(g2));
    const auto [k_p, dk_p] = std::make_pair(table.k(g2), table.dk(g2));
    const auto [a_p, da_p] = std::make_pair(table.alpha(g2), table.dalpha(g2));
    const auto [b_p, db_p] = std::make_pair(table.beta(g2), table.dbeta(g2));

    r.eps = 1.0 + (eps_p - 1.0) * (1.0 - g1h);
    r.deps_dg1 = -(eps_p - 1.0);
    r.deps_dg2 = deps_p * (1.0 - g1h);

    auto ramp = [g1h](double q, double& w, double& dw) {
        w = (1.0 - g1h) / (1.0 + q * g1h);
        dw = -(1.0 + q) / ((1.0 + q * g1h) * (1.0 + q * g1h));
    };
    double wk, dwk, wf, dwf;
    ramp(q_k, wk, dwk);
    ramp(q_f, wf, dwf);

    r.k = phys.k_f + (k_p - phys.k_f) * wk;
    r.dk_dg1 = (k_p - phys.k_f) * dwk;
    r.dk_dg2 = dk_p * wk;

    r.alpha = alpha_f + (a_p - alpha_f) * wf;
    r.dalpha_dg1 = (a_p - alpha_f) * dwf;
    r.dalpha_dg2 = da_p * wf;

    r.beta = beta_f + (b_p - beta_f) * wf;
    r.dbeta_dg1 = (b_p - beta_f) * dwf;
    r.dbeta_dg2 = db_p * wf;
    return r;
}

/// Interfacial heat-transfer coefficients of the two-layer stack: fluid-side
/// h_t, base-side h_b, and their series combination.
struct HeatTransferCoeffs {
    double h_t = 0.0, h_b = 0.0, h = 0.0;
    double dh_dk = 0.0;  ///< derivative of the combined h w.r.t. the fluid-layer k
};

inline HeatTransferCoeffs heat_transfer_coefficients(double k, const PhysicalParams& phys) {
    if (!(k > 0.0)) throw std::invalid_argument("heat_transfer_coefficients: k must be > 0");
    HeatTransferCoeffs c;
    c.h_t = 35.0 * k / (26.0 * phys.H_t);
    c.h_b = phys.k_s / phys.H_b;
    c.h = c.h_t * c.h_b / (c.h_t + c.h_b);
    const double dht_dk = 35.0 / (26.0 * phys.H_t);
    const double r = c.h_b / (c.h_t + c.h_b);
    c.dh_dk = dht_dk * r * r;
    return c;
}

/// Continuation stages for the RAMP convexity parameters.
struct ContinuationSchedule {
    std::vector<double> q_k_stages{1.0, 5.0, 10.0, 50.0};
    std::vector<double> q_f_stages{50.0, 10.0, 5.0, 1.0};
    int stage_length = 50;

    void validate() const {
        if (q_k_stages.empty() || q_k_stages.size() != q_f_stages.size())
            throw std::invalid_argument("ContinuationSchedule: stage lists must be non-empty and equal length");
        if (stage_length < 1) throw std::invalid_argument("ContinuationSchedule: stage_length must be >= 1");
    }
    int stage_count() const { return static_cast<int>(q_k_stages.size()); }
    /// Stage index for a 1-based iteration number.
    int stage_of(int iter) const {
        const int s = (iter - 1) / stage_length;
        return std::clamp(s, 0, stage_count() - 1);
    }
};

/// Synthetic default property curves for the 2.5 mm BCC cell. The relative
/// density follows a quadratic-minus-cubic strut-volume model, conductivity
/// scales with a third of the relative density, and the flow-resistance
/// curves are power laws in relative density pinned to the fitted reference
/// point (alpha, beta) = (30756, 225360) at gamma2 = 0.6.
inline LatticePropertyTable default_property_table(double d_min = 0.3e-3, double d_max = 1.3e-3,
                                                   double cell = 2.5e-3, double k_f = 0.598,
                                                   double k_s = 100.0) {
    auto rel_density = [&](double g2) {
        const double x = (d_min + g2 * (d_max - d_min)) / cell;
        return 5.441 * x * x - 5.0 * x * x * x;
    };
    const double rho_ref = rel_density(0.6);
    const double alpha_ref = 30756.0, beta_ref = 225360.0;
    std::vector<PropertySample> rows;
    const int n = 11;
    for (int i = 0; i < n; ++i) {
        const double g2 = static_cast<double>(i) / (n - 1);
        const double rho = rel_density(g2);
        PropertySample s;
        s.gamma2 = g2;
        s.eps_por = 1.0 - rho;
        s.k_por = k_f + (rho / 3.0) * (k_s - k_f);
        s.alpha_por = alpha_ref * std::pow(rho / rho_ref, 1.5);
        s.beta_por = beta_ref * std::pow(rho / rho_ref, 2.0);
        rows.push_back(s);
    }
    return LatticePropertyTable(std::move(rows), d_min, d_max);
}

} // namespace lattopt
