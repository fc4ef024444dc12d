#include "qbsdej/paths.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qbsdej/numerics.hpp"

namespace qbsdej {

PathSet simulate_paths(const TimeGrid& grid, const MarkSpace& marks,
                       std::size_t count, std::uint64_t seed) {
    if (count == 0)
        throw std::invalid_argument("simulate_paths: need at least one path");
    const int n = grid.steps;
    const int m = marks.size();

    // Per-step thinning thresholds; also validates the step-size condition.
    std::vector<double> cumw(static_cast<std::size_t>(n) *
                             static_cast<std::size_t>(m));
    for (int k = 0; k < n; ++k) {
        const double t = grid.time(k);
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
            acc += marks.weight(j, t) * grid.dt;
            cumw[static_cast<std::size_t>(k) * static_cast<std::size_t>(m) +
                 static_cast<std::size_t>(j)] = acc;
        }
        if (!(acc < 1.0)) {
            std::ostringstream msg;
            msg << "simulate_paths: lambda(t_k) * dt = " << acc
                << " >= 1 at k = " << k << "; thinning needs lambda * dt < 1";
            throw std::invalid_argument(msg.str());
        }
    }

    PathSet out;
    out.grid = grid;
    out.marks = marks;
    out.count = count;
    out.seed = seed;
    out.db.resize(count * static_cast<std::size_t>(n));
    out.jump.assign(count * static_cast<std::size_t>(n), -1);

    const double sqdt = std::sqrt(grid.dt);
#pragma omp parallel for schedule(static)
    for (long long ip = 0; ip < static_cast<long long>(count); ++ip) {
        const std::size_t i = static_cast<std::size_t>(ip);
        for (int k = 0; k < n; ++k) {
            const std::size_t idx =
                i * static_cast<std::size_t>(n) + static_cast<std::size_t>(k);
            const std::uint64_t b1 = counter_mix(seed, i, static_cast<std::uint64_t>(k), 0);
            const std::uint64_t b2 = counter_mix(seed, i, static_cast<std::uint64_t>(k), 1);
            out.db[idx] = sqdt * normal_from_bits(b1, b2);
            if (m > 0) {
                const double u = uniform_from_bits(
                    counter_mix(seed, i, static_cast<std::uint64_t>(k), 2));
                for (int j = 0; j < m; ++j) {
                    if (u < cumw[static_cast<std::size_t>(k) *
                                     static_cast<std::size_t>(m) +
                                 static_cast<std::size_t>(j)]) {
                        out.jump[idx] = static_cast<std::int8_t>(j);
                        break;
                    }
                }
            }
        }
    }
    return out;
}

} // namespace qbsdej
