#pragma once

#include <cstdint>
#include <vector>

#include "qbsdej/mark_space.hpp"
#include "qbsdej/time_grid.hpp"

namespace qbsdej {

/// Simulated increments of the driving noise: one Brownian increment and at
/// most one (thinned) jump per step. Draws are indexed by
/// (seed, path, step), so any subset of paths is reproducible and the
/// layout is byte-identical no matter how many threads filled it.
struct PathSet {
    TimeGrid grid;
    MarkSpace marks;
    std::size_t count = 0;
    std::uint64_t seed = 0;

    std::vector<double> db;           // [path * steps + k]
    std::vector<std::int8_t> jump;    // mark index, -1 when no jump

    double increment(std::size_t path, int k) const {
        return db[path * static_cast<std::size_t>(grid.steps) +
                  static_cast<std::size_t>(k)];
    }
    int jump_mark(std::size_t path, int k) const {
        return jump[path * static_cast<std::size_t>(grid.steps) +
                    static_cast<std::size_t>(k)];
    }
};

/// Euler-free exact simulation of the driving noise on the grid: Brownian
/// increments ~ N(0, dt), jumps by thinning with P(mark j at step k) =
/// w_j(t_k) dt. Requires lambda(t_k) * dt < 1 at every step.
PathSet simulate_paths(const TimeGrid& grid, const MarkSpace& marks,
                       std::size_t count, std::uint64_t seed);

} // namespace qbsdej
