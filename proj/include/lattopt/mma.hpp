#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace lattopt {

/// Tuning constants of the moving-asymptote update.
struct MmaOptions {
    double move_limit = 0.15;     ///< max step, fraction of the variable range
    double asy_init = 0.5;        ///< initial asymptote distance, fraction of range
    double asy_grow = 1.2;        ///< expansion factor on monotone history
    double asy_shrink = 0.7;      ///< contraction factor on oscillating history
    double raa0 = 1e-5;           ///< convexity floor of the approximations
    double albefa = 0.1;          ///< bound margin towards the asymptotes
};

/// Sequential convex approximation with moving asymptotes, specialised to a
/// single inequality constraint g(x) <= 0. Each subproblem is solved exactly
/// through its scalar dual.
class MmaSolver {
public:
    MmaSolver(int n, double x_min, double x_max, MmaOptions opt = {})
        : n_(n), xmin_(x_min), xmax_(x_max), opt_(opt), low_(n), upp_(n), xold1_(n), xold2_(n) {
        if (n < 1) throw std::invalid_argument("MmaSolver: need at least one variable");
        if (!(x_max > x_min)) throw std::invalid_argument("MmaSolver: empty box");
    }

    int iteration() const { return iter_; }
    const std::vector<double>& lower_asymptotes() const { return low_; }
    const std::vector<double>& upper_asymptotes() const { return upp_; }
    bool last_subproblem_infeasible() const { return last_infeasible_; }

    /// One design update. df0 is the objective gradient, g the constraint
    /// value and dg its gradient at x. Returns the subproblem minimiser.
    std::vector<double> update(const std::vector<double>& x, const std::vector<double>& df0, double g,
                               const std::vector<double>& dg) {
        if (static_cast<int>(x.size()) != n_ || static_cast<int>(df0.size()) != n_ ||
            static_cast<int>(dg.size()) != n_)
            throw std::invalid_argument("MmaSolver: size mismatch");
        for (double v : x)
            if (!(v >= xmin_ - 1e-12 && v <= xmax_ + 1e-12))
                throw std::invalid_argument("MmaSolver: iterate violates box bounds");
        for (int j = 0; j < n_; ++j)
            if (!std::isfinite(df0[j]) || !std::isfinite(dg[j]))
                throw std::invalid_argument("MmaSolver: non-finite gradient");

        ++iter_;
        const double range = xmax_ - xmin_;
        if (iter_ <= 2) {
            for (int j = 0; j < n_; ++j) {
                low_[j] = x[j] - opt_.asy_init * range;
                upp_[j] = x[j] + opt_.asy_init * range;
            }
        } else {
            for (int j = 0; j < n_; ++j) {
                const double osc = (x[j] - xold1_[j]) * (xold1_[j] - xold2_[j]);
                const double f = osc > 0.0 ? opt_.asy_grow : (osc < 0.0 ? opt_.asy_shrink : 1.0);
                low_[j] = x[j] - f * (xold1_[j] - low_[j]);
                upp_[j] = x[j] + f * (upp_[j] - xold1_[j]);
                low_[j] = std::clamp(low_[j], x[j] - 10.0 * range, x[j] - 0.01 * range);
                upp_[j] = std::clamp(upp_[j], x[j] + 0.01 * range, x[j] + 10.0 * range);
            }
        }

        // Separable approximations: numerators of the objective (p0, q0) and
        // constraint (p1, q1) fractions.
        std::vector<double> alpha(n_), beta(n_), p0(n_), q0(n_), p1(n_), q1(n_);
        for (int j = 0; j < n_; ++j) {
            alpha[j] = std::max({xmin_, low_[j] + opt_.albefa * (x[j] - low_[j]), x[j] - opt_.move_limit * range});
            beta[j] = std::min({xmax_, upp_[j] - opt_.albefa * (upp_[j] - x[j]), x[j] + opt_.move_limit * range});
            if (beta[j] < alpha[j]) beta[j] = alpha[j];
            const double ux = upp_[j] - x[j], xl = x[j] - low_[j];
            auto split = [&](double grad, double& p, double& q) {
                const double gp = std::max(grad, 0.0), gm = std::max(-grad, 0.0);
                p = ux * ux * (1.001 * gp + 0.001 * gm + opt_.raa0 / range);
                q = xl * xl * (0.001 * gp + 1.001 * gm + opt_.raa0 / range);
            };
            split(df0[j], p0[j], q0[j]);
            split(dg[j], p1[j], q1[j]);
        }
        // Subproblem constraint: sum_j p1/(u-x) + q1/(x-l) <= b1.
        double b1 = -g;
        for (int j = 0; j < n_; ++j) b1 += p1[j] / (upp_[j] - x[j]) + q1[j] / (x[j] - low_[j]);

        auto x_of_lambda = [&](double lam, std::vector<double>& out) {
            for (int j = 0; j < n_; ++j) {
                const double sp = std::sqrt(p0[j] + lam * p1[j]);
                const double sq = std::sqrt(q0[j] + lam * q1[j]);
                out[j] = std::clamp((low_[j] * sp + upp_[j] * sq) / (sp + sq), alpha[j], beta[j]);
            }
        };
        auto g_of = [&](const std::vector<double>& xs) {
            double s = -b1;
            for (int j = 0; j < n_; ++j) s += p1[j] / (upp_[j] - xs[j]) + q1[j] / (xs[j] - low_[j]);
            return s;
        };

        std::vector<double> xs(n_);
        last_infeasible_ = false;
        x_of_lambda(0.0, xs);
        if (g_of(xs) > 0.0) {
            // Dual ascent: g_of(x(lambda)) decreases in lambda; bracket then bisect.
            double lo = 0.0, hi = 1.0;
            x_of_lambda(hi, xs);
            int guard = 0;
            while (g_of(xs) > 0.0 && guard++ < 80) {
                hi *= 10.0;
                x_of_lambda(hi, xs);
            }
            if (g_of(xs) > 0.0) {
                last_infeasible_ = true;  // constraint not attainable inside the move box
            } else {
                for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
                    const double mid = 0.5 * (lo + hi);
                    x_of_lambda(mid, xs);
                    (g_of(xs) > 0.0 ? lo : hi) = mid;
                }
                x_of_lambda(hi, xs);
            }
        }

        xold2_ = iter_ >= 2 ? xold1_ : x;
        xold1_ = x;
        return xs;
    }

private:
    int n_;
    double xmin_, xmax_;
    MmaOptions opt_;
    std::vector<double> low_, upp_, xold1_, xold2_;
    int iter_ = 0;
    bool last_infeasible_ = false;
};

} // namespace lattopt
