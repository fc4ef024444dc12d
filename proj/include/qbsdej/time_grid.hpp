#pragma once

#include <stdexcept>

namespace qbsdej {

/// Uniform partition 0 = t_0 < t_1 < ... < t_n = T of the trading horizon.
///
/// Every lattice and path object in the library is indexed against one of
/// these grids; dt is stored once so that step arithmetic is consistent
/// everywhere (dt = T/n, t_k = k*dt).
struct TimeGrid {
    double horizon = 1.0;
    int steps = 1;
    double dt = 1.0;

    TimeGrid() = default;

    TimeGrid(double horizon_, int steps_) : horizon(horizon_), steps(steps_) {
        if (!(horizon_ > 0.0))
            throw std::invalid_argument("TimeGrid: horizon must be positive");
        if (steps_ < 1)
            throw std::invalid_argument("TimeGrid: need at least one step");
        dt = horizon_ / static_cast<double>(steps_);
    }

    double time(int k) const { return static_cast<double>(k) * dt; }
};

} // namespace qbsdej
