#include "qbsdej/decompositions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qbsdej/errors.hpp"
#include "qbsdej/numerics.hpp"
#include "slice_topo.hpp"

namespace qbsdej {

namespace {

void check_shape(const Lattice& lat, const AdaptedProcess& x,
                 const char* who) {
    if (static_cast<int>(x.values.size()) != lat.steps() + 1)
        throw std::invalid_argument(std::string(who) +
                                    ": process must cover every slice");
    for (int k = 0; k <= lat.steps(); ++k)
        if (x.values[static_cast<std::size_t>(k)].size() != lat.slice_size(k))
            throw std::invalid_argument(std::string(who) + ": slice " +
                                        std::to_string(k) +
                                        " does not match the lattice");
}

double sup_norm(const AdaptedProcess& x) {
    double s = 0.0;
    for (const auto& slice : x.values)
        for (double v : slice) s = std::max(s, std::abs(v));
    return s;
}

// One-step conditional g-expectations E^g_k[X_{k+1}] for every k, read off
// cached two-slice solves.
std::vector<const LatticeSolution*> one_step_solves(const GExpectation& ge,
                                                    const AdaptedProcess& x) {
    const int n = ge.lattice().steps();
    std::vector<const LatticeSolution*> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
        out[static_cast<std::size_t>(k)] =
            &ge.solve_values(x.values[static_cast<std::size_t>(k) + 1], k + 1,
                             k);
    return out;
}

} // namespace

AdaptedProcess drifted_process(const Lattice& lat, const LatticeSolution& sol,
                               double slope) {
    AdaptedProcess x;
    x.values = sol.y;
    for (std::size_t k = 0; k < x.values.size(); ++k) {
        const double t =
            lat.grid().time(sol.start_slice + static_cast<int>(k));
        for (double& v : x.values[k]) v += slope * t;
    }
    return x;
}

Classification classify_process(const GExpectation& ge,
                                const AdaptedProcess& x, double tol) {
    const Lattice& lat = ge.lattice();
    check_shape(lat, x, "classify_process");
    Classification cls;
    const auto solves = one_step_solves(ge, x);
    for (int k = 0; k < lat.steps(); ++k) {
        const auto& e = solves[static_cast<std::size_t>(k)]->y[0];
        const auto& xk = x.values[static_cast<std::size_t>(k)];
        for (std::size_t node = 0; node < xk.size(); ++node) {
            const double d = e[node] - xk[node];
            cls.max_up = std::max(cls.max_up, d);
            cls.max_down = std::max(cls.max_down, -d);
        }
    }
    if (cls.max_up <= tol && cls.max_down <= tol)
        cls.type = ProcessClass::martingale;
    else if (cls.max_down <= tol)
        cls.type = ProcessClass::submartingale;
    else if (cls.max_up <= tol)
        cls.type = ProcessClass::supermartingale;
    else
        cls.type = ProcessClass::neither;
    return cls;
}

DoobMeyer doob_meyer(const GExpectation& ge, const AdaptedProcess& x,
                     double tol) {
    const Lattice& lat = ge.lattice();
    check_shape(lat, x, "doob_meyer");
    const Classification cls = classify_process(ge, x, tol);
    if (cls.type == ProcessClass::neither)
        throw std::invalid_argument(
            "doob_meyer: one-step increments change sign beyond tolerance "
            "(up " +
            std::to_string(cls.max_up) + ", down " +
            std::to_string(cls.max_down) +
            "); the input is not a g-sub/supermartingale");

    const int n = lat.steps();
    const int m = lat.mark_count();
    const double dt = lat.grid().dt;
    const double sd = lat.sqrt_dt();
    const GeneratorSpec& g = ge.generator();

    DoobMeyer dm;
    dm.type = cls.type;
    dm.z.resize(static_cast<std::size_t>(n));
    dm.u.resize(static_cast<std::size_t>(n));
    dm.a_incr.resize(static_cast<std::size_t>(n));
    dm.a.resize(static_cast<std::size_t>(n) + 1);
    dm.a[0] = {0.0};

    const auto solves = one_step_solves(ge, x);
    for (int k = 0; k < n; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        const LatticeSolution& os = *solves[ks];
        dm.z[ks] = os.z[0];
        dm.u[ks] = os.u[0];
        dm.a_incr[ks].resize(lat.slice_size(k));
        for (std::size_t node = 0; node < dm.a_incr[ks].size(); ++node)
            dm.a_incr[ks][node] = os.y[0][node] - x.values[ks][node];
    }

    // Compensator accumulated forward; disagreement between parents of a
    // shared child measures how far A is from a true node function.
    for (int k = 0; k < n; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        const detail::SliceTopo topo = detail::slice_topo(lat, k);
        dm.a[ks + 1].assign(lat.slice_size(k + 1), 0.0);
        std::vector<bool> seen(lat.slice_size(k + 1), false);
        for (std::size_t node = 0; node < dm.a[ks].size(); ++node) {
            const double next = dm.a[ks][node] + dm.a_incr[ks][node];
            for (int br = 0; br < lat.branch_count(); ++br) {
                if (topo.prob[static_cast<std::size_t>(br)] == 0.0) continue;
                const std::size_t child = topo.child(node, br);
                if (!seen[child]) {
                    seen[child] = true;
                    dm.a[ks + 1][child] = next;
                } else {
                    dm.a_consistency =
                        std::max(dm.a_consistency,
                                 std::abs(dm.a[ks + 1][child] - next));
                }
            }
        }
    }

    // Pathwise reconstruction along every reachable branch:
    // X_k = X_{k+1} + g dt - Z dB - U d(compensated jumps) - dA.
    for (int k = 0; k < n; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        const double tk = lat.grid().time(k);
        const detail::SliceTopo topo = detail::slice_topo(lat, k);
        for (std::size_t node = 0; node < x.values[ks].size(); ++node) {
            const double xk = x.values[ks][node];
            const double zk = dm.z[ks][node];
            const std::span<const double> uk(
                dm.u[ks].data() + node * static_cast<std::size_t>(m),
                static_cast<std::size_t>(m));
            double comp = 0.0;
            for (int j = 0; j < m; ++j)
                comp += lat.weight(j, k) * uk[static_cast<std::size_t>(j)];
            const double gval = g.evaluate(tk, xk, zk, uk);
            for (int br = 0; br < lat.branch_count(); ++br) {
                if (topo.prob[static_cast<std::size_t>(br)] == 0.0) continue;
                const int j = lat.branch_mark(br);
                const double jumps =
                    (j >= 0 ? uk[static_cast<std::size_t>(j)] : 0.0) -
                    comp * dt;
                const double rhs =
                    x.values[ks + 1][topo.child(node, br)] + gval * dt -
                    zk * lat.branch_brownian_sign(br) * sd - jumps -
                    dm.a_incr[ks][node];
                dm.max_recon_residual =
                    std::max(dm.max_recon_residual, std::abs(xk - rhs));
            }
        }
    }
    return dm;
}

int count_upcrossings(std::span<const double> xs, double a, double b) {
    if (!(a < b))
        throw std::invalid_argument("count_upcrossings: need a < b");
    int count = 0;
    bool armed = false;
    for (double x : xs) {
        if (!armed && x <= a)
            armed = true;
        else if (armed && x >= b) {
            ++count;
            armed = false;
        }
    }
    return count;
}

namespace {

// Exact expectation of the scan count: forward expansion over
// (node, armed) with the same transition rule as count_upcrossings.
template <class ProbFn>
double upcrossing_phase_dp(const Lattice& lat, const AdaptedProcess& x,
                           double a, double b, ProbFn&& prob) {
    const int n = lat.steps();
    double completions = 0.0;
    // mass[2 * node + armed]
    std::vector<double> mass(2, 0.0);
    mass[x.values[0][0] <= a ? 1 : 0] = 1.0;
    for (int k = 0; k < n; ++k) {
        const detail::SliceTopo topo = detail::slice_topo(lat, k);
        const std::size_t sz = lat.slice_size(k);
        std::vector<double> next(2 * lat.slice_size(k + 1), 0.0);
        for (std::size_t node = 0; node < sz; ++node) {
            for (int armed = 0; armed < 2; ++armed) {
                const double p = mass[2 * node + static_cast<std::size_t>(armed)];
                if (p == 0.0) continue;
                for (int br = 0; br < lat.branch_count(); ++br) {
                    const double q = prob(k, node, br);
                    if (q == 0.0) continue;
                    const std::size_t child = topo.child(node, br);
                    const double xc =
                        x.values[static_cast<std::size_t>(k) + 1][child];
                    int armed_next = armed;
                    if (!armed && xc <= a) {
                        armed_next = 1;
                    } else if (armed && xc >= b) {
                        completions += p * q;
                        armed_next = 0;
                    }
                    next[2 * child + static_cast<std::size_t>(armed_next)] +=
                        p * q;
                }
            }
        }
        mass.swap(next);
    }
    return completions;
}

} // namespace

double expected_upcrossings(const Lattice& lat, const AdaptedProcess& x,
                            double a, double b) {
    if (!(a < b))
        throw std::invalid_argument("expected_upcrossings: need a < b");
    check_shape(lat, x, "expected_upcrossings");
    return upcrossing_phase_dp(lat, x, a, b,
                               [&](int k, std::size_t, int br) {
                                   return lat.branch_probability(k, br);
                               });
}

double expected_upcrossings(const ShiftedLattice& shifted,
                            const AdaptedProcess& x, double a, double b) {
    if (!(a < b))
        throw std::invalid_argument("expected_upcrossings: need a < b");
    const Lattice& lat = shifted.base();
    check_shape(lat, x, "expected_upcrossings");
    return upcrossing_phase_dp(lat, x, a, b,
                               [&](int k, std::size_t node, int br) {
                                   return shifted.probability(k, node, br);
                               });
}

McEstimate expected_upcrossings_mc(const Lattice& lat,
                                   const AdaptedProcess& x, double a,
                                   double b, std::size_t paths,
                                   std::uint64_t seed) {
    if (!(a < b))
        throw std::invalid_argument("expected_upcrossings_mc: need a < b");
    check_shape(lat, x, "expected_upcrossings_mc");
    if (paths < 2)
        throw std::invalid_argument("expected_upcrossings_mc: need >= 2 paths");
    const int n = lat.steps();
    const int nb = lat.branch_count();

    // Per-slice cumulative branch probabilities for inverse sampling.
    std::vector<double> cum(static_cast<std::size_t>(n) *
                            static_cast<std::size_t>(nb));
    std::vector<detail::SliceTopo> topo;
    topo.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        topo.push_back(detail::slice_topo(lat, k));
        double acc = 0.0;
        for (int br = 0; br < nb; ++br) {
            acc += lat.branch_probability(k, br);
            cum[static_cast<std::size_t>(k) * static_cast<std::size_t>(nb) +
                static_cast<std::size_t>(br)] = acc;
        }
    }

    // Counts are integers, so the parallel reduction is exact and the
    // result does not depend on the thread count.
    std::int64_t total = 0;
    std::int64_t total_sq = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : total, total_sq)
#endif
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(paths); ++p) {
        std::size_t node = 0;
        bool armed = x.values[0][0] <= a;
        int count = 0;
        for (int k = 0; k < n; ++k) {
            const double udraw = uniform_from_bits(counter_mix(
                seed, static_cast<std::uint64_t>(p),
                static_cast<std::uint64_t>(k), 0));
            int br = 0;
            const double* c =
                cum.data() +
                static_cast<std::size_t>(k) * static_cast<std::size_t>(nb);
            while (br + 1 < nb && udraw >= c[br]) ++br;
            node = topo[static_cast<std::size_t>(k)].child(node, br);
            const double xc = x.values[static_cast<std::size_t>(k) + 1][node];
            if (!armed && xc <= a) {
                armed = true;
            } else if (armed && xc >= b) {
                ++count;
                armed = false;
            }
        }
        total += count;
        total_sq += static_cast<std::int64_t>(count) * count;
    }

    McEstimate est;
    const double np = static_cast<double>(paths);
    est.mean = static_cast<double>(total) / np;
    const double var =
        (static_cast<double>(total_sq) - np * est.mean * est.mean) /
        (np - 1.0);
    est.se = std::sqrt(std::max(0.0, var) / np);
    return est;
}

namespace {

double j_constant(double gamma, double m, double beta, double horizon,
                  double x_sup) {
    if (beta == 0.0) return gamma * m * horizon + gamma * x_sup;
    return gamma * m * std::expm1(beta * horizon) / beta +
           gamma * std::exp(beta * horizon) * x_sup;
}

} // namespace

UpcrossingReport verify_upcrossing_bound(const GExpectation& ge,
                                         const AdaptedProcess& x, double a,
                                         double b, double theta) {
    if (!(a < b))
        throw std::invalid_argument("verify_upcrossing_bound: need a < b");
    if (!(theta > 0.0 && theta < 1.0))
        throw std::invalid_argument(
            "verify_upcrossing_bound: theta must lie in (0, 1)");
    const Lattice& lat = ge.lattice();
    check_shape(lat, x, "verify_upcrossing_bound");
    const GeneratorSpec& g = ge.generator();
    if (!g.convex_in_zu)
        throw std::invalid_argument(
            "verify_upcrossing_bound: the explicit bound covers the convex "
            "generator case");
    const Classification cls = classify_process(ge, x, 1e-10);
    if (cls.type != ProcessClass::submartingale &&
        cls.type != ProcessClass::martingale)
        throw std::invalid_argument(
            "verify_upcrossing_bound: process is not a g-submartingale");

    UpcrossingReport rep;
    rep.a = a;
    rep.b = b;
    rep.theta = theta;
    rep.gamma = g.profile.gamma;
    rep.m = g.profile.m;
    rep.beta = g.profile.beta;
    rep.x_sup = sup_norm(x);
    rep.j_const = j_constant(rep.gamma, rep.m, rep.beta, lat.grid().horizon,
                             rep.x_sup);
    rep.k_theta = std::max(g.profile.lipschitz_y, g.profile.m);

    const double q = rep.gamma * theta / (1.0 - theta);
    rep.bound = (std::exp(q * rep.x_sup) + std::exp(q * std::abs(a))) /
                (std::exp(q * b) - std::exp(q * a));

    // Exact weighted enumeration whenever the lattice is small enough to
    // expand; Monte Carlo with a standard error otherwise.
    const bool exact = lat.slice_size(lat.steps()) <= 400000;
    if (exact) {
        rep.expected_count = expected_upcrossings(lat, x, a, b);
        rep.standard_error = 0.0;
    } else {
        const McEstimate est =
            expected_upcrossings_mc(lat, x, a, b, 200000, 0x9b1du);
        rep.expected_count = est.mean;
        rep.standard_error = est.se;
    }
    rep.margin = rep.bound - rep.expected_count;
    if (rep.expected_count > rep.bound + 3.0 * rep.standard_error)
        throw NumericalError(
            "verify_upcrossing_bound: expected count " +
            std::to_string(rep.expected_count) + " exceeds the bound " +
            std::to_string(rep.bound));
    return rep;
}

DensityBoundReport verify_upcrossing_density_bound(
    const GExpectation& ge, const AdaptedProcess& x, double a, double b,
    std::optional<double> k) {
    if (!(a < b))
        throw std::invalid_argument(
            "verify_upcrossing_density_bound: need a < b");
    const GeneratorSpec& g = ge.generator();
    if (g.builtin != GeneratorSpec::Builtin::linear &&
        g.builtin != GeneratorSpec::Builtin::royer)
        throw std::invalid_argument(
            "verify_upcrossing_density_bound: the slope processes (phi, "
            "kernel) are explicit only for the linear and Royer built-ins");
    const Lattice& lat = ge.lattice();
    check_shape(lat, x, "verify_upcrossing_density_bound");

    // The density is the stochastic exponential of the generator's slope
    // processes read along the representation coefficients of X; the
    // quadratic part lambda^n vanishes for these built-ins, so the
    // subgradient supplies (phi, kernel) directly.
    const DoobMeyer dm = doob_meyer(ge, x, 1e-10);
    const int n = lat.steps();
    const int m = lat.mark_count();
    MeasureChange mc;
    mc.mu.resize(static_cast<std::size_t>(n));
    mc.v.resize(static_cast<std::size_t>(n));
    for (int kk = 0; kk < n; ++kk) {
        const std::size_t ks = static_cast<std::size_t>(kk);
        const double tk = lat.grid().time(kk);
        const std::size_t sz = lat.slice_size(kk);
        mc.mu[ks].assign(sz, 0.0);
        mc.v[ks].assign(sz * static_cast<std::size_t>(m), 0.0);
        for (std::size_t node = 0; node < sz; ++node) {
            const std::span<const double> uk(
                dm.u[ks].data() + node * static_cast<std::size_t>(m),
                static_cast<std::size_t>(m));
            std::span<double> v(mc.v[ks].data() +
                                    node * static_cast<std::size_t>(m),
                                static_cast<std::size_t>(m));
            mc.mu[ks][node] = g.subgradient(tk, dm.z[ks][node], uk, v);
        }
    }
    const ShiftedLattice shifted = girsanov_shift(lat, mc);

    DensityBoundReport rep;
    rep.k_used = k.value_or(std::max(g.profile.lipschitz_y, g.profile.m));
    rep.j_const = j_constant(g.profile.gamma, g.profile.m, g.profile.beta,
                             lat.grid().horizon, sup_norm(x));
    rep.expected_count = expected_upcrossings(shifted, x, a, b);
    rep.bound = (sup_norm(x) +
                 2.0 * rep.k_used * (rep.j_const + 1.0) * lat.grid().horizon +
                 std::abs(a)) /
                (b - a);
    rep.margin = rep.bound - rep.expected_count;
    return rep;
}

} // namespace qbsdej
