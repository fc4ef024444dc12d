#include "qbsdej/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "one_step.hpp"
#include "qbsdej/errors.hpp"

namespace qbsdej {

namespace detail {

void check_solve_inputs(const Lattice& lat, const GeneratorSpec& g,
                        const std::vector<double>& values, int terminal,
                        int stop) {
    if (stop < 0 || terminal < stop || terminal > lat.steps())
        throw std::invalid_argument(
            "solve_lattice: need 0 <= stop_slice <= terminal_slice <= steps");
    if (values.size() != lat.slice_size(terminal))
        throw std::invalid_argument(
            "solve_lattice: terminal values do not match slice " +
            std::to_string(terminal));
    if (static_cast<int>(g.marks.size()) != lat.mark_count())
        throw std::invalid_argument(
            "solve_lattice: generator and lattice mark counts differ");
    if (g.depends_on_y && !(g.profile.lipschitz_y * lat.grid().dt < 1.0))
        throw std::invalid_argument(
            "solve_lattice: implicit y step needs lipschitz_y * dt < 1; "
            "refine the grid");
}

void finish_solution(LatticeSolution& sol) {
    double sup = 0.0;
    for (const auto& slice : sol.y)
        for (double v : slice) sup = std::max(sup, std::abs(v));
    sol.y_sup = sup;
}

} // namespace detail

std::vector<double> terminal_values(const Lattice& lattice,
                                    const TerminalCondition& xi, int slice) {
    if (!xi.payoff)
        throw std::invalid_argument("terminal_values: payoff not set");
    if (!(xi.bound > 0.0))
        throw std::invalid_argument(
            "terminal_values: a positive sup-norm bound must be declared");
    std::vector<double> out(lattice.slice_size(slice));
    const double sd = lattice.sqrt_dt();
    bool bad = false;
    std::size_t bad_node = 0;
    double bad_value = 0.0;
    lattice.for_each_state(
        slice, [&](std::size_t node, int b, std::span<const int> counts) {
            const double v = xi.payoff(sd * b, counts);
            out[node] = v;
            if (!bad &&
                (!std::isfinite(v) || std::abs(v) > xi.bound * (1.0 + 1e-12))) {
                bad = true;
                bad_node = node;
                bad_value = v;
            }
        });
    if (bad)
        throw std::invalid_argument(
            "terminal_values: payoff exceeds its declared bound at node " +
            std::to_string(bad_node) + " (value " + std::to_string(bad_value) +
            ", bound " + std::to_string(xi.bound) + ")");
    return out;
}

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

    for (int k = terminal - 1; k >= stop; --k) {
        const std::size_t i = static_cast<std::size_t>(k - stop);
        const std::size_t sz = lat.slice_size(k);
        sol.y[i].assign(sz, 0.0);
        sol.z[i].assign(sz, 0.0);
        sol.u[i].assign(sz * static_cast<std::size_t>(m), 0.0);

        const std::vector<double>& next = sol.y[i + 1];
        double* ys = sol.y[i].data();
        double* zs = sol.z[i].data();
        double* us = sol.u[i].data();

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

        std::atomic<bool> failed{false};
        std::exception_ptr err;

        // Nodes are independent given the child slice, so the sweep is a
        // flat parallel loop with disjoint writes.
#ifdef _OPENMP
#pragma omp parallel
#endif
        {
            std::vector<double> v(static_cast<std::size_t>(nb));
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
            for (std::int64_t node = 0; node < static_cast<std::int64_t>(sz);
                 ++node) {
                if (failed.load(std::memory_order_relaxed)) continue;
                try {
                    const std::size_t n = static_cast<std::size_t>(node);
                    const std::size_t bidx = n / nc;
                    const std::size_t crank = n % nc;
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
                    std::span<double> u(us + n * static_cast<std::size_t>(m),
                                        static_cast<std::size_t>(m));
                    detail::u_projection(v, m, u);
                    const double y =
                        detail::implicit_y(ctx, g, e, z, u, opts, k, n);
                    if (!std::isfinite(y))
                        throw NumericalError(
                            "solve_lattice: non-finite value at slice " +
                            std::to_string(k) + ", node " + std::to_string(n));
                    ys[n] = y;
                    zs[n] = z;
                } catch (...) {
#ifdef _OPENMP
#pragma omp critical(qbsdej_solver_err)
#endif
                    {
                        if (!failed.exchange(true))
                            err = std::current_exception();
                    }
                }
            }
        }
        if (err) std::rethrow_exception(err);
    }

    detail::finish_solution(sol);
    return sol;
}

LatticeSolution solve_lattice(const Lattice& lat, const GeneratorSpec& g,
                              const TerminalCondition& xi,
                              const SolverOptions& opts) {
    return solve_lattice_values(lat, g, terminal_values(lat, xi, lat.steps()),
                                lat.steps(), 0, opts);
}

DiagnosticsReport bmo_diagnostics(const LatticeSolution& sol) {
    const Lattice& lat = *sol.model;
    const int m = lat.mark_count();
    const int nb = lat.branch_count();
    const double dt = lat.grid().dt;
    const int start = sol.start_slice;
    const int terminal = sol.terminal_slice;
    const int span = terminal - start;

    DiagnosticsReport rep;
    rep.y_sup = sol.y_sup;
    rep.root_z_tail.assign(static_cast<std::size_t>(span), 0.0);
    rep.root_u_tail.assign(static_cast<std::size_t>(span), 0.0);

    // Conditional remaining quadratic variation, by backward accumulation:
    // R_k = increment_k + E_k[R_{k+1}], with increment |Z|^2 dt for the
    // Brownian part and sum_j w_j(t_k) U_j^2 dt for the jump part.
    std::vector<double> rz(lat.slice_size(terminal), 0.0);
    std::vector<double> ru(lat.slice_size(terminal), 0.0);
    for (int k = terminal - 1; k >= start; --k) {
        const std::size_t i = static_cast<std::size_t>(k - start);
        const std::size_t sz = lat.slice_size(k);
        const std::size_t nc = lat.count_vectors(k);
        const std::size_t nc_next = lat.count_vectors(k + 1);
        const std::vector<std::size_t> table = lat.child_count_ranks(k);
        std::vector<double> prob(static_cast<std::size_t>(nb));
        for (int br = 0; br < nb; ++br)
            prob[static_cast<std::size_t>(br)] = lat.branch_probability(k, br);

        std::vector<double> rz_k(sz, 0.0), ru_k(sz, 0.0);
        for (std::size_t node = 0; node < sz; ++node) {
            const std::size_t bidx = node / nc;
            const std::size_t crank = node % nc;
            const std::size_t up = (bidx + 1) * nc_next;
            const std::size_t dn = bidx * nc_next;
            const std::size_t* row =
                table.data() + crank * static_cast<std::size_t>(m + 1);
            double ez = 0.0, eu = 0.0;
            for (int f = 0; f <= m; ++f) {
                const std::size_t fs = static_cast<std::size_t>(f);
                const std::size_t cu = up + row[fs];
                const std::size_t cd = dn + row[fs];
                ez += prob[2 * fs] * rz[cu] + prob[2 * fs + 1] * rz[cd];
                eu += prob[2 * fs] * ru[cu] + prob[2 * fs + 1] * ru[cd];
            }
            const double zk = sol.z[i][node];
            double ju = 0.0;
            for (int j = 0; j < m; ++j) {
                const double uj =
                    sol.u[i][node * static_cast<std::size_t>(m) +
                             static_cast<std::size_t>(j)];
                ju += lat.weight(j, k) * uj * uj;
            }
            rz_k[node] = zk * zk * dt + ez;
            ru_k[node] = ju * dt + eu;
            rep.z_bmo = std::max(rep.z_bmo, rz_k[node]);
            rep.u_bmo = std::max(rep.u_bmo, ru_k[node]);
        }
        rz.swap(rz_k);
        ru.swap(ru_k);
    }

    // Seen from the root, the tails are plain expectations under the
    // forward node probabilities; nonincreasing in k by construction.
    const auto fwd = lat.forward_probabilities();
    std::vector<double> zstep(static_cast<std::size_t>(span), 0.0);
    std::vector<double> ustep(static_cast<std::size_t>(span), 0.0);
    for (int k = start; k < terminal; ++k) {
        const std::size_t i = static_cast<std::size_t>(k - start);
        const auto& pk = fwd[static_cast<std::size_t>(k)];
        for (std::size_t node = 0; node < pk.size(); ++node) {
            const double zk = sol.z[i][node];
            zstep[i] += pk[node] * zk * zk * dt;
            double ju = 0.0;
            for (int j = 0; j < m; ++j) {
                const double uj =
                    sol.u[i][node * static_cast<std::size_t>(m) +
                             static_cast<std::size_t>(j)];
                ju += lat.weight(j, k) * uj * uj;
            }
            ustep[i] += pk[node] * ju * dt;
        }
    }
    double tz = 0.0, tu = 0.0;
    for (int i = span - 1; i >= 0; --i) {
        tz += zstep[static_cast<std::size_t>(i)];
        tu += ustep[static_cast<std::size_t>(i)];
        rep.root_z_tail[static_cast<std::size_t>(i)] = tz;
        rep.root_u_tail[static_cast<std::size_t>(i)] = tu;
    }
    return rep;
}

} // namespace qbsdej
