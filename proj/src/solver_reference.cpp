#include "qbsdej/solver.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "one_step.hpp"
#include "qbsdej/errors.hpp"

// Serial reference driver. Deliberately plain: one loop, no scheduling, no
// error marshalling. It shares the per-node kernel with the parallel sweep,
// so any disagreement between the two is an orchestration bug, and tests
// compare them bitwise.

namespace qbsdej {

namespace detail {
void check_solve_inputs(const Lattice& lat, const GeneratorSpec& g,
                        const std::vector<double>& values, int terminal,
                        int stop);
void finish_solution(LatticeSolution& sol);
} // namespace detail

namespace ref {

LatticeSolution solve_lattice_values(const Lattice& lat,
                                     const GeneratorSpec& g,
                                     std::vector<double> values, int terminal,
                                     int stop, const SolverOptions& opts) {
    detail::check_solve_inputs(lat, g, values, terminal, stop);

    const int m = lat.mark_count();
    const int nb = lat.branch_count();
    const int span = terminal - stop;

    LatticeSolution sol;
    sol.model = &lat;
    sol.start_slice = stop;
    sol.terminal_slice = terminal;
    sol.y.resize(static_cast<std::size_t>(span) + 1);
    sol.z.resize(static_cast<std::size_t>(span));
    sol.u.resize(static_cast<std::size_t>(span));
    sol.y[static_cast<std::size_t>(span)] = std::move(values);

    std::vector<double> prob(static_cast<std::size_t>(nb));
    std::vector<double> v(static_cast<std::size_t>(nb));

    for (int k = terminal - 1; k >= stop; --k) {
        const std::size_t i = static_cast<std::size_t>(k - stop);
        const std::size_t sz = lat.slice_size(k);
        sol.y[i].assign(sz, 0.0);
        sol.z[i].assign(sz, 0.0);
        sol.u[i].assign(sz * static_cast<std::size_t>(m), 0.0);
        const std::vector<double>& next = sol.y[i + 1];

        detail::StepContext ctx;
        ctx.t = lat.grid().time(k);
        ctx.dt = lat.grid().dt;
        ctx.sqrt_dt = lat.sqrt_dt();
        for (int br = 0; br < nb; ++br)
            prob[static_cast<std::size_t>(br)] = lat.branch_probability(k, br);
        ctx.prob = prob;

        const std::vector<std::size_t> table = lat.child_count_ranks(k);
        const std::size_t nc = lat.count_vectors(k);
        const std::size_t nc_next = lat.count_vectors(k + 1);

        for (std::size_t node = 0; node < sz; ++node) {
            const std::size_t bidx = node / nc;
            const std::size_t crank = node % nc;
            const std::size_t up = (bidx + 1) * nc_next;
            const std::size_t dn = bidx * nc_next;
            const std::size_t* row =
                table.data() + crank * static_cast<std::size_t>(m + 1);
            for (int f = 0; f <= m; ++f) {
                const std::size_t fs = static_cast<std::size_t>(f);
                v[2 * fs] = next[up + row[fs]];
                v[2 * fs + 1] = next[dn + row[fs]];
            }
            const double e = detail::expectation(ctx, v);
            const double z = detail::z_projection(ctx, v);
            std::span<double> u(
                sol.u[i].data() + node * static_cast<std::size_t>(m),
                static_cast<std::size_t>(m));
            detail::u_projection(v, m, u);
            const double y = detail::implicit_y(ctx, g, e, z, u, opts, k, node);
            if (!std::isfinite(y))
                throw NumericalError("solve_lattice: non-finite value at slice " +
                                     std::to_string(k) + ", node " +
                                     std::to_string(node));
            sol.y[i][node] = y;
            sol.z[i][node] = z;
        }
    }

    detail::finish_solution(sol);
    return sol;
}

LatticeSolution solve_lattice(const Lattice& lat, const GeneratorSpec& g,
                              const TerminalCondition& xi,
                              const SolverOptions& opts) {
    return ref::solve_lattice_values(lat, g,
                                     terminal_values(lat, xi, lat.steps()),
                                     lat.steps(), 0, opts);
}

} // namespace ref
} // namespace qbsdej
