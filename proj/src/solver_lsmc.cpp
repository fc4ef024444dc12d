#include "qbsdej/solver.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "one_step.hpp"
#include "qbsdej/errors.hpp"
#include "qbsdej/numerics.hpp"

// Least-squares Monte Carlo backend. Normal equations are accumulated
// serially in path order, so results are bit-stable across runs and thread
// counts; at desk scale the regressions are cheap anyway.

namespace qbsdej {

namespace {

struct SliceFit {
    std::vector<int> kept_phi;    // column ids within the plain basis
    std::vector<double> c_cont;   // continuation coefficients, kept_phi order
    std::vector<double> c_z;      // Z coefficients, kept_phi order
    std::vector<double> u;        // one estimate per mark (0 when dropped)
};

// Plain basis columns evaluated on a running state: 1, B, ..., B^degree,
// then the jump counts when enabled.
void eval_phi(const BasisSpec& basis, int m, double b, const int* counts,
              std::vector<double>& phi) {
    phi[0] = 1.0;
    double p = 1.0;
    for (int d = 1; d <= basis.degree; ++d) {
        p *= b;
        phi[static_cast<std::size_t>(d)] = p;
    }
    if (basis.include_counts)
        for (int j = 0; j < m; ++j)
            phi[static_cast<std::size_t>(basis.degree + 1 + j)] =
                static_cast<double>(counts[j]);
}

} // namespace

PathSolution solve_lsmc(const PathSet& ps, const GeneratorSpec& g,
                        const TerminalCondition& xi, const BasisSpec& basis,
                        const SolverOptions& opts) {
    const std::size_t np = ps.count;
    const int n = ps.grid.steps;
    const int m = ps.marks.size();
    const double dt = ps.grid.dt;
    const int nphi = basis.size(m);
    const int nfull = nphi + m;

    if (basis.degree < 1)
        throw std::invalid_argument("solve_lsmc: basis degree must be >= 1");
    if (static_cast<int>(g.marks.size()) != m)
        throw std::invalid_argument(
            "solve_lsmc: generator and path mark counts differ");
    if (np < 10 * static_cast<std::size_t>(nfull))
        throw std::invalid_argument(
            "solve_lsmc: need at least 10 paths per regression column (" +
            std::to_string(10 * nfull) + " for this basis)");
    if (!xi.payoff || !(xi.bound > 0.0))
        throw std::invalid_argument(
            "solve_lsmc: payoff with a positive declared bound required");
    if (g.depends_on_y && !(g.profile.lipschitz_y * dt < 1.0))
        throw std::invalid_argument(
            "solve_lsmc: implicit y step needs lipschitz_y * dt < 1");

    const std::size_t nsl = static_cast<std::size_t>(n) + 1;
    const std::size_t ms = static_cast<std::size_t>(m);

    // Forward running states.
    std::vector<double> bpath(np * nsl, 0.0);
    std::vector<int> counts(np * nsl * ms, 0);
    for (std::size_t p = 0; p < np; ++p) {
        for (int k = 0; k < n; ++k) {
            const std::size_t at = p * nsl + static_cast<std::size_t>(k);
            bpath[at + 1] = bpath[at] + ps.increment(p, k);
            const int jm = ps.jump_mark(p, k);
            for (int j = 0; j < m; ++j)
                counts[(at + 1) * ms + static_cast<std::size_t>(j)] =
                    counts[at * ms + static_cast<std::size_t>(j)] +
                    (jm == j ? 1 : 0);
        }
    }

    PathSolution sol;
    sol.paths = np;
    sol.steps = n;
    sol.mark_count = m;
    sol.y.assign(np * nsl, 0.0);
    sol.z.assign(np * static_cast<std::size_t>(n), 0.0);
    sol.u.assign(np * static_cast<std::size_t>(n) * ms, 0.0);

    for (std::size_t p = 0; p < np; ++p) {
        const std::size_t at = p * nsl + static_cast<std::size_t>(n);
        const double v = xi.payoff(
            bpath[at], std::span<const int>(counts.data() + at * ms, ms));
        if (!std::isfinite(v) || std::abs(v) > xi.bound * (1.0 + 1e-12))
            throw std::invalid_argument(
                "solve_lsmc: payoff exceeds its declared bound on path " +
                std::to_string(p));
        sol.y[at] = v;
    }

    std::vector<SliceFit> fits(static_cast<std::size_t>(n));
    std::vector<double> col(static_cast<std::size_t>(nfull));
    std::vector<double> phi(static_cast<std::size_t>(nphi));
    std::vector<double> first(static_cast<std::size_t>(nfull));

    detail::StepContext ctx;
    ctx.dt = dt;
    ctx.sqrt_dt = std::sqrt(dt);

    for (int k = n - 1; k >= 0; --k) {
        const double tk = ps.grid.time(k);
        SliceFit& fit = fits[static_cast<std::size_t>(k)];
        fit.u.assign(ms, 0.0);

        auto fill_row = [&](std::size_t p) {
            const std::size_t at = p * nsl + static_cast<std::size_t>(k);
            eval_phi(basis, m, bpath[at], counts.data() + at * ms, phi);
            for (int c = 0; c < nphi; ++c)
                col[static_cast<std::size_t>(c)] =
                    phi[static_cast<std::size_t>(c)];
            const int jm = ps.jump_mark(p, k);
            for (int j = 0; j < m; ++j)
                col[static_cast<std::size_t>(nphi + j)] =
                    (jm == j ? 1.0 : 0.0) - g.marks.weight(j, tk) * dt;
        };

        // Keep the intercept plus every column that actually varies across
        // paths; constants are absorbed by the intercept.
        fill_row(0);
        first.assign(col.begin(), col.end());
        std::vector<bool> varies(static_cast<std::size_t>(nfull), false);
        for (std::size_t p = 1; p < np; ++p) {
            fill_row(p);
            for (int c = 1; c < nfull; ++c)
                if (col[static_cast<std::size_t>(c)] !=
                    first[static_cast<std::size_t>(c)])
                    varies[static_cast<std::size_t>(c)] = true;
        }
        std::vector<int> kept{0};
        for (int c = 1; c < nfull; ++c)
            if (varies[static_cast<std::size_t>(c)]) kept.push_back(c);
        int nphik = 0;
        for (int c : kept)
            if (c < nphi) ++nphik;
        const std::size_t nk = kept.size();

        std::vector<double> gram(nk * nk, 0.0);
        std::vector<double> ry(nk, 0.0);
        std::vector<double> rz(static_cast<std::size_t>(nphik), 0.0);
        for (std::size_t p = 0; p < np; ++p) {
            fill_row(p);
            const double target =
                sol.y[p * nsl + static_cast<std::size_t>(k) + 1];
            const double ztarget = target * ps.increment(p, k) / dt;
            for (std::size_t a = 0; a < nk; ++a) {
                const double xa = col[static_cast<std::size_t>(kept[a])];
                for (std::size_t b = 0; b <= a; ++b)
                    gram[a * nk + b] +=
                        xa * col[static_cast<std::size_t>(kept[b])];
                ry[a] += xa * target;
                if (static_cast<int>(a) < nphik)
                    rz[a] += xa * ztarget;
            }
        }
        for (std::size_t a = 0; a < nk; ++a)
            for (std::size_t b = a + 1; b < nk; ++b)
                gram[a * nk + b] = gram[b * nk + a];

        const std::string ctx_name = "solve_lsmc: slice " + std::to_string(k);
        const std::vector<double> cy =
            solve_spd(gram, ry, nk, (ctx_name + " value regression").c_str());
        std::vector<double> gram_phi(
            static_cast<std::size_t>(nphik) * static_cast<std::size_t>(nphik));
        for (int a = 0; a < nphik; ++a)
            for (int b = 0; b < nphik; ++b)
                gram_phi[static_cast<std::size_t>(a * nphik + b)] =
                    gram[static_cast<std::size_t>(a) * nk +
                         static_cast<std::size_t>(b)];
        const std::vector<double> cz =
            solve_spd(gram_phi, rz, static_cast<std::size_t>(nphik),
                      (ctx_name + " control regression").c_str());

        fit.kept_phi.assign(kept.begin(), kept.begin() + nphik);
        fit.c_cont.assign(cy.begin(), cy.begin() + nphik);
        fit.c_z = cz;
        for (std::size_t a = static_cast<std::size_t>(nphik); a < nk; ++a)
            fit.u[static_cast<std::size_t>(kept[a] - nphi)] = cy[a];

        ctx.t = tk;
        double ss = 0.0;
        for (std::size_t p = 0; p < np; ++p) {
            fill_row(p);
            double cont = 0.0, zhat = 0.0, full = 0.0;
            for (std::size_t a = 0; a < nk; ++a) {
                const double xa = col[static_cast<std::size_t>(kept[a])];
                full += xa * cy[a];
                if (static_cast<int>(a) < nphik) {
                    cont += xa * cy[a];
                    zhat += xa * cz[a];
                }
            }
            const std::size_t at = p * nsl + static_cast<std::size_t>(k);
            const std::size_t zat =
                p * static_cast<std::size_t>(n) + static_cast<std::size_t>(k);
            sol.z[zat] = zhat;
            for (int j = 0; j < m; ++j)
                sol.u[zat * ms + static_cast<std::size_t>(j)] =
                    fit.u[static_cast<std::size_t>(j)];
            sol.y[at] = detail::implicit_y(ctx, g, cont, zhat, fit.u, opts, k,
                                           p);
            const double res = sol.y[at + 1] - full;
            ss += res * res;
        }
        sol.max_regression_residual = std::max(
            sol.max_regression_residual,
            std::sqrt(ss / static_cast<double>(np)));
    }

    sol.y0 = sol.y[0];

    // Out-of-sample check: fresh noise, same fitted coefficients, and the
    // forward identity y0 = E[xi + sum_k g dt] along each path.
    const PathSet fresh =
        simulate_paths(ps.grid, ps.marks, np, splitmix64(ps.seed));
    std::vector<double> bcur(1, 0.0);
    std::vector<int> ccur(ms, 0);
    double mean = 0.0, msq = 0.0;
    std::vector<double> phival(static_cast<std::size_t>(nphi));
    for (std::size_t p = 0; p < np; ++p) {
        double b = 0.0;
        std::fill(ccur.begin(), ccur.end(), 0);
        double acc = 0.0;
        for (int k = 0; k < n; ++k) {
            const SliceFit& fit = fits[static_cast<std::size_t>(k)];
            eval_phi(basis, m, b, ccur.data(), phival);
            double cont = 0.0, zhat = 0.0;
            for (std::size_t a = 0; a < fit.kept_phi.size(); ++a) {
                const double xa =
                    phival[static_cast<std::size_t>(fit.kept_phi[a])];
                cont += xa * fit.c_cont[a];
                zhat += xa * fit.c_z[a];
            }
            ctx.t = ps.grid.time(k);
            const double yk =
                detail::implicit_y(ctx, g, cont, zhat, fit.u, opts, k, p);
            acc += g.evaluate(ctx.t, yk, zhat, fit.u) * dt;
            b += fresh.increment(p, k);
            const int jm = fresh.jump_mark(p, k);
            if (jm >= 0) ++ccur[static_cast<std::size_t>(jm)];
        }
        const double v = xi.payoff(b, ccur) + acc;
        const double d = v - mean;
        mean += d / static_cast<double>(p + 1);
        msq += d * (v - mean);
    }
    sol.y0_out = mean;
    sol.y0_out_se =
        np > 1 ? std::sqrt(msq / static_cast<double>(np - 1) /
                           static_cast<double>(np))
               : 0.0;
    return sol;
}

} // namespace qbsdej
