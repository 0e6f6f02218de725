#pragma once

#include <cstdint>
#include <random>

#include "lattopt/grid.hpp"

namespace lattopt {

/// Seedable uniform generator with a portable draw path: mt19937_64 output
/// mapped to [0,1) directly, so identical seeds reproduce identical streams
/// on every platform (std::uniform_real_distribution is not portable).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

private:
    std::mt19937_64 eng_;
};

/// One validation-harness sample: a per-sample void probability u drawn from
/// [void_lo, void_hi], binary gamma1 per cell with P(void) = u, and gamma2
/// uniform on [0,1] per cell. Draw order: u, all gamma1, all gamma2.
inline DesignField random_design(Rng& rng, int n_cells, double void_lo, double void_hi) {
    DesignField d = DesignField::constant(n_cells, 0.0, 0.0);
    const double u = rng.uniform(void_lo, void_hi);
    for (int c = 0; c < n_cells; ++c) d.gamma1[static_cast<size_t>(c)] = rng.uniform01() < u ? 1.0 : 0.0;
    for (int c = 0; c < n_cells; ++c) d.gamma2[static_cast<size_t>(c)] = rng.uniform01();
    return d;
}

} // namespace lattopt
