#pragma once

// Per-node pieces of the backward scheme, shared by the parallel sweep and
// the serial reference driver. Keeping the arithmetic in one place (same
// expressions, same branch summation order) is what makes the two drivers
// bitwise comparable.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "qbsdej/errors.hpp"
#include "qbsdej/generator.hpp"
#include "qbsdej/solver.hpp"

namespace qbsdej::detail {

struct StepContext {
    double t = 0.0;
    double dt = 0.0;
    double sqrt_dt = 0.0;
    std::span<const double> prob; // per branch, 2 * (m + 1) entries
};

/// E_k[Y_{k+1}] at the node, summed in increasing branch order.
inline double expectation(const StepContext& c, std::span<const double> v) {
    double e = 0.0;
    for (std::size_t br = 0; br < v.size(); ++br) e += c.prob[br] * v[br];
    return e;
}

/// Z_k = E_k[Y_{k+1} dB] / dt; dB = +-sqrt(dt) per branch parity.
inline double z_projection(const StepContext& c, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t br = 0; br < v.size(); ++br) {
        const double term = c.prob[br] * v[br];
        s += (br & 1U) ? -term : term;
    }
    return s / c.sqrt_dt;
}

/// U_k(x_j): Brownian-averaged jump-j child value minus the no-jump one.
inline void u_projection(std::span<const double> v, int m, std::span<double> u) {
    const double d0 = 0.5 * (v[0] + v[1]);
    for (int j = 0; j < m; ++j) {
        const std::size_t f = 2 * static_cast<std::size_t>(j + 1);
        u[static_cast<std::size_t>(j)] = 0.5 * (v[f] + v[f + 1]) - d0;
    }
}

/// Y_k = E_k[Y_{k+1}] + g(t_k, Y_k, Z_k, U_k) dt; a single evaluation when
/// g ignores y, otherwise the fixed point (the driver has already checked
/// the contraction condition lipschitz_y * dt < 1).
inline double implicit_y(const StepContext& c, const GeneratorSpec& g,
                         double e, double z, std::span<const double> u,
                         const SolverOptions& opts, int k, std::size_t node) {
    if (!g.depends_on_y) return e + g.evaluate(c.t, e, z, u) * c.dt;
    double y = e;
    for (int it = 0; it < opts.max_fixed_point_iters; ++it) {
        const double next = e + g.evaluate(c.t, y, z, u) * c.dt;
        if (std::abs(next - y) <=
            opts.fixed_point_tol * std::max(1.0, std::abs(next)))
            return next;
        y = next;
    }
    throw NumericalError("implicit y step did not converge at slice " +
                         std::to_string(k) + ", node " + std::to_string(node));
}

} // namespace qbsdej::detail
