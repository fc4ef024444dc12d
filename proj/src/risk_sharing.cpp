#include "qbsdej/risk_sharing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qbsdej/errors.hpp"
#include "qbsdej/numerics.hpp"
#include "slice_topo.hpp"

namespace qbsdej {

namespace {

bool is_entropic(const GeneratorSpec& g) {
    return g.builtin == GeneratorSpec::Builtin::entropic;
}
bool is_linear(const GeneratorSpec& g) {
    return g.builtin == GeneratorSpec::Builtin::linear;
}

struct MinimizeResult {
    double value = 0.0;
    std::vector<double> x;
    bool converged = false;
    bool unbounded = false;
};

// Damped gradient descent on the split objective
//   f(z1, u1) = g1(t, z1, u1) + g2(t, z - z1, u - u1),
// central finite differences, gradient tolerance 1e-8.
MinimizeResult minimize_split(const GeneratorSpec& g1, const GeneratorSpec& g2,
                              double t, double z, std::span<const double> u,
                              std::vector<double> start) {
    const int m = static_cast<int>(u.size());
    const std::size_t dim = static_cast<std::size_t>(m) + 1;
    MinimizeResult res;
    res.x = std::move(start);

    std::vector<double> u1(static_cast<std::size_t>(m));
    std::vector<double> u2(static_cast<std::size_t>(m));
    auto eval = [&](const std::vector<double>& x) {
        for (int j = 0; j < m; ++j) {
            const std::size_t js = static_cast<std::size_t>(j);
            u1[js] = x[js + 1];
            u2[js] = u[js] - x[js + 1];
        }
        return g1.evaluate(t, 0.0, x[0], u1) +
               g2.evaluate(t, 0.0, z - x[0], u2);
    };

    const double h = 1e-5;
    std::vector<double> grad(dim);
    std::vector<double> trial(dim);
    double fx = eval(res.x);
    double step = 1.0;
    for (int it = 0; it < 10000; ++it) {
        double gnorm = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            trial = res.x;
            trial[i] += h;
            const double fp = eval(trial);
            trial[i] -= 2.0 * h;
            const double fm = eval(trial);
            grad[i] = (fp - fm) / (2.0 * h);
            gnorm = std::max(gnorm, std::abs(grad[i]));
        }
        if (gnorm <= 1e-8) {
            res.value = fx;
            res.converged = true;
            return res;
        }
        bool moved = false;
        for (double s = step; s > 1e-16; s *= 0.5) {
            for (std::size_t i = 0; i < dim; ++i)
                trial[i] = res.x[i] - s * grad[i];
            const double ft = eval(trial);
            if (ft < fx) {
                res.x = trial;
                fx = ft;
                step = s * 4.0;
                moved = true;
                break;
            }
        }
        if (!moved) {
            // No descent step at finite-difference resolution. Accept the
            // point when the gradient is already small, else report the
            // stall as non-convergence.
            res.value = fx;
            res.converged = gnorm <= 1e-5;
            return res;
        }
        double xnorm = 0.0;
        for (double xv : res.x) xnorm = std::max(xnorm, std::abs(xv));
        if (xnorm > 1e6 || fx < -1e12) {
            res.value = fx;
            res.unbounded = true;
            return res;
        }
    }
    res.value = fx;
    return res;
}

void require_convex_y_free(const GeneratorSpec& g, const char* who) {
    if (g.depends_on_y || !g.convex_in_zu)
        throw std::invalid_argument(std::string(who) +
                                    ": generators must be convex and y-free "
                                    "(no closed form recognized)");
}

GeneratorSpec entropic_linear_infconv(const GeneratorSpec& ge,
                                      const GeneratorSpec& gl) {
    const double theta = ge.param1;
    const double a = gl.param1;
    const double b = gl.param2;
    const MarkSpace marks = ge.marks;
    const int m = marks.size();

    std::vector<double> kappa(static_cast<std::size_t>(m));
    std::vector<double> cpart(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        const double chi = std::min(1.0, std::abs(marks.mark(j)));
        const double l1p = std::log1p(b * chi);
        kappa[static_cast<std::size_t>(j)] = b * chi;
        cpart[static_cast<std::size_t>(j)] =
            theta * (b * chi - (1.0 + b * chi) * l1p);
    }

    // Profile and flags of the affine result match the linear generator:
    // the constant offset cancels from the centered growth sandwich.
    GeneratorSpec out = linear_generator(a, b, marks);
    out.name = "entropic_linear_infconv";
    out.builtin = GeneratorSpec::Builtin::none;
    out.param1 = theta;
    out.param2 = 0.0;
    out.positively_homogeneous = false;
    out.evaluate = [marks, kappa, cpart, a, theta](
                       double t, double, double z,
                       std::span<const double> u) {
        double s = a * z - 0.5 * a * a * theta;
        for (int j = 0; j < marks.size(); ++j) {
            const std::size_t js = static_cast<std::size_t>(j);
            s += marks.weight(j, t) * (kappa[js] * u[js] + cpart[js]);
        }
        return s;
    };
    return out;
}

} // namespace

GeneratorSpec infconv_generator(const GeneratorSpec& g1,
                                const GeneratorSpec& g2) {
    if (g1.marks.size() != g2.marks.size())
        throw std::invalid_argument(
            "infconv_generator: generators live on different mark spaces");

    if (is_entropic(g1) && is_entropic(g2))
        return entropic_generator(g1.param1 + g2.param1, g1.marks);
    if (is_entropic(g1) && is_linear(g2))
        return entropic_linear_infconv(g1, g2);
    if (is_linear(g1) && is_entropic(g2))
        return entropic_linear_infconv(g2, g1);

    require_convex_y_free(g1, "infconv_generator");
    require_convex_y_free(g2, "infconv_generator");

    const int m = g1.marks.size();
    GeneratorSpec c1 = g1;
    GeneratorSpec c2 = g2;

    // Properness: the value at (z,u) = (0,0) must be bounded below, checked
    // numerically on a few representative times (the built-in weight
    // families are piecewise constant, so a coarse probe suffices).
    const std::vector<double> zero(static_cast<std::size_t>(m), 0.0);
    for (double t : {0.0, 0.5, 1.0, 2.0}) {
        const MinimizeResult probe = minimize_split(
            c1, c2, t, 0.0, zero,
            std::vector<double>(static_cast<std::size_t>(m) + 1, 0.0));
        if (probe.unbounded)
            throw std::invalid_argument(
                "infconv_generator: (g1 [] g2)(t,0,0) is unbounded below at "
                "t = " +
                std::to_string(t));
    }

    GeneratorSpec out;
    out.name = g1.name + "_box_" + g2.name;
    out.marks = g1.marks;
    out.depends_on_y = false;
    out.convex_in_zu = true;
    out.concave_in_zu = false;
    out.positively_homogeneous =
        g1.positively_homogeneous && g2.positively_homogeneous;
    out.profile.m = g1.profile.m + g2.profile.m;
    out.profile.beta = 0.0;
    out.profile.gamma = g1.profile.gamma + g2.profile.gamma;
    out.profile.lipschitz_y = 0.0;
    out.evaluate = [c1, c2, m](double t, double, double z,
                               std::span<const double> u) {
        std::vector<double> start(static_cast<std::size_t>(m) + 1, 0.0);
        start[0] = 0.5 * z;
        for (int j = 0; j < m; ++j)
            start[static_cast<std::size_t>(j) + 1] =
                0.5 * u[static_cast<std::size_t>(j)];
        const MinimizeResult r = minimize_split(c1, c2, t, z, u, std::move(start));
        if (r.unbounded || !r.converged)
            throw NumericalError(
                "infconv_generator: numeric minimization failed at (z,u)");
        return r.value;
    };
    return out;
}

void optimal_split(const GeneratorSpec& g1, const GeneratorSpec& g2, double t,
                   double z, std::span<const double> u, double& z1,
                   std::span<double> u1, double& z2, std::span<double> u2) {
    const int m = g1.marks.size();
    if (static_cast<int>(u.size()) != m ||
        static_cast<int>(u1.size()) != m || static_cast<int>(u2.size()) != m)
        throw std::invalid_argument("optimal_split: u spans must match marks");

    if (is_entropic(g1) && is_entropic(g2)) {
        const double w = g1.param1 / (g1.param1 + g2.param1);
        z1 = w * z;
        z2 = z - z1;
        for (int j = 0; j < m; ++j) {
            const std::size_t js = static_cast<std::size_t>(j);
            u1[js] = w * u[js];
            u2[js] = u[js] - u1[js];
        }
        return;
    }
    if ((is_entropic(g1) && is_linear(g2)) ||
        (is_linear(g1) && is_entropic(g2))) {
        const bool first_entropic = is_entropic(g1);
        const GeneratorSpec& ent = first_entropic ? g1 : g2;
        const GeneratorSpec& lin = first_entropic ? g2 : g1;
        const double theta = ent.param1;
        const double a = lin.param1;
        const double b = lin.param2;
        const double ze = a * theta;
        double& zent = first_entropic ? z1 : z2;
        double& zlin = first_entropic ? z2 : z1;
        std::span<double> uent = first_entropic ? u1 : u2;
        std::span<double> ulin = first_entropic ? u2 : u1;
        zent = ze;
        zlin = z - ze;
        for (int j = 0; j < m; ++j) {
            const std::size_t js = static_cast<std::size_t>(j);
            const double chi = std::min(1.0, std::abs(ent.marks.mark(j)));
            uent[js] = theta * std::log1p(b * chi);
            ulin[js] = u[js] - uent[js];
        }
        return;
    }

    require_convex_y_free(g1, "optimal_split");
    require_convex_y_free(g2, "optimal_split");
    std::vector<double> start(static_cast<std::size_t>(m) + 1, 0.0);
    start[0] = 0.5 * z;
    for (int j = 0; j < m; ++j)
        start[static_cast<std::size_t>(j) + 1] =
            0.5 * u[static_cast<std::size_t>(j)];
    const MinimizeResult r = minimize_split(g1, g2, t, z, u, std::move(start));
    if (r.unbounded)
        throw NumericalError("optimal_split: objective unbounded below");
    if (!r.converged)
        throw NumericalError(
            "optimal_split: minimizer did not converge within 10000 "
            "iterations");
    z1 = r.x[0];
    z2 = z - z1;
    for (int j = 0; j < m; ++j) {
        const std::size_t js = static_cast<std::size_t>(j);
        u1[js] = r.x[js + 1];
        u2[js] = u[js] - u1[js];
    }
}

namespace {

// Sampled sufficient condition: g stays midpoint-convex after subtracting
// (c/2)(|z|^2 + sum_j w_j(t) u_j^2).
bool sampled_strong_convexity(const GeneratorSpec& g, double c, int samples,
                              double horizon) {
    const int m = g.marks.size();
    SeededRng rng(0x5e95u);
    std::vector<double> ua(static_cast<std::size_t>(m));
    std::vector<double> ub(static_cast<std::size_t>(m));
    std::vector<double> um(static_cast<std::size_t>(m));
    for (int s = 0; s < samples; ++s) {
        const double t = rng.uniform(0.0, horizon);
        const double za = rng.uniform(-5.0, 5.0);
        const double zb = rng.uniform(-5.0, 5.0);
        double quad = (za - zb) * (za - zb);
        for (int j = 0; j < m; ++j) {
            const std::size_t js = static_cast<std::size_t>(j);
            ua[js] = rng.uniform(-3.0, 3.0);
            ub[js] = rng.uniform(-3.0, 3.0);
            um[js] = 0.5 * (ua[js] + ub[js]);
            quad += g.marks.weight(j, t) * (ua[js] - ub[js]) * (ua[js] - ub[js]);
        }
        const double mid = g.evaluate(t, 0.0, 0.5 * (za + zb), um);
        const double avg = 0.5 * (g.evaluate(t, 0.0, za, ua) +
                                  g.evaluate(t, 0.0, zb, ub));
        if (mid > avg - 0.125 * c * quad + 1e-12) return false;
    }
    return true;
}

} // namespace

RiskTransfer build_transfer(const Lattice& lat, const GeneratorSpec& g1,
                            const GeneratorSpec& g2,
                            const TerminalCondition& xi,
                            const TransferOptions& opts) {
    if (g1.marks.size() != lat.mark_count() ||
        g2.marks.size() != lat.mark_count())
        throw std::invalid_argument(
            "build_transfer: generator marks do not match the lattice");

    const GeneratorSpec combined = infconv_generator(g1, g2);

    if (opts.require_strong_convexity &&
        !sampled_strong_convexity(g1, opts.strong_convexity_c,
                                  opts.convexity_samples,
                                  lat.grid().horizon) &&
        !sampled_strong_convexity(g2, opts.strong_convexity_c,
                                  opts.convexity_samples,
                                  lat.grid().horizon))
        throw std::invalid_argument(
            "build_transfer: neither generator passed the sampled strong "
            "convexity check that guarantees an attained optimal split; set "
            "require_strong_convexity = false to build anyway");

    RiskTransfer rt;
    rt.g1 = g1;
    rt.g2 = g2;
    rt.combined = solve_lattice(lat, combined, xi);
    rt.combined_value = rt.combined.y0();
    rt.xi_values = rt.combined.y.back();

    const int n = lat.steps();
    const int m = lat.mark_count();
    const double dt = lat.grid().dt;
    const double sd = lat.sqrt_dt();

    rt.z1.resize(static_cast<std::size_t>(n));
    rt.z2.resize(static_cast<std::size_t>(n));
    rt.u1.resize(static_cast<std::size_t>(n));
    rt.u2.resize(static_cast<std::size_t>(n));

    for (int k = 0; k < n; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        const double tk = lat.grid().time(k);
        const std::size_t sz = lat.slice_size(k);
        rt.z1[ks].assign(sz, 0.0);
        rt.z2[ks].assign(sz, 0.0);
        rt.u1[ks].assign(sz * static_cast<std::size_t>(m), 0.0);
        rt.u2[ks].assign(sz * static_cast<std::size_t>(m), 0.0);
        for (std::size_t node = 0; node < sz; ++node) {
            const double z = rt.combined.z[ks][node];
            const std::span<const double> u(
                rt.combined.u[ks].data() + node * static_cast<std::size_t>(m),
                static_cast<std::size_t>(m));
            std::span<double> u1(rt.u1[ks].data() +
                                     node * static_cast<std::size_t>(m),
                                 static_cast<std::size_t>(m));
            std::span<double> u2(rt.u2[ks].data() +
                                     node * static_cast<std::size_t>(m),
                                 static_cast<std::size_t>(m));
            optimal_split(g1, g2, tk, z, u, rt.z1[ks][node], u1,
                          rt.z2[ks][node], u2);
            const double defect =
                g1.evaluate(tk, 0.0, rt.z1[ks][node], u1) +
                g2.evaluate(tk, 0.0, rt.z2[ks][node], u2) -
                combined.evaluate(tk, 0.0, z, u);
            rt.max_split_defect =
                std::max(rt.max_split_defect, std::abs(defect));
        }
    }

    // Agent 2's side integrated forward from F2_0 = 0. On a recombining
    // lattice two parents can reach the same child; the first write wins and
    // any disagreement is reported, not hidden.
    std::vector<double> f2{0.0};
    for (int k = 0; k < n; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        const double tk = lat.grid().time(k);
        const detail::SliceTopo topo = detail::slice_topo(lat, k);
        const std::size_t sz = lat.slice_size(k);
        std::vector<double> nextf(lat.slice_size(k + 1), 0.0);
        std::vector<bool> seen(lat.slice_size(k + 1), false);
        for (std::size_t node = 0; node < sz; ++node) {
            const std::span<const double> u2(
                rt.u2[ks].data() + node * static_cast<std::size_t>(m),
                static_cast<std::size_t>(m));
            const double z2 = rt.z2[ks][node];
            double comp = 0.0;
            for (int j = 0; j < m; ++j)
                comp += lat.weight(j, k) * u2[static_cast<std::size_t>(j)];
            const double base = f2[node] -
                                g2.evaluate(tk, 0.0, z2, u2) * dt - comp * dt;
            for (int br = 0; br < lat.branch_count(); ++br) {
                if (topo.prob[static_cast<std::size_t>(br)] == 0.0) continue;
                const int j = lat.branch_mark(br);
                double val = base + lat.branch_brownian_sign(br) * z2 * sd;
                if (j >= 0) val += u2[static_cast<std::size_t>(j)];
                const std::size_t child = topo.child(node, br);
                if (!seen[child]) {
                    seen[child] = true;
                    nextf[child] = val;
                } else {
                    rt.f2_consistency = std::max(rt.f2_consistency,
                                                 std::abs(nextf[child] - val));
                }
            }
        }
        f2.swap(nextf);
    }

    rt.f2 = std::move(f2);
    rt.f1.resize(rt.xi_values.size());
    for (std::size_t i = 0; i < rt.f1.size(); ++i)
        rt.f1[i] = rt.xi_values[i] - rt.f2[i];

    rt.premium = solve_lattice_values(lat, g2, rt.f2, n, 0).y0();
    const double e1 = solve_lattice_values(lat, g1, rt.f1, n, 0).y0();
    rt.decomposition_gap = std::abs(rt.combined_value - e1 - rt.premium);
    rt.decomposition_ok = rt.decomposition_gap <= 1e-8;
    return rt;
}

AuditReport suboptimality_audit(const RiskTransfer& rt, int trials,
                                std::uint64_t seed) {
    if (trials < 1)
        throw std::invalid_argument("suboptimality_audit: trials must be >= 1");
    const Lattice& lat = *rt.combined.model;
    const int n = lat.steps();

    auto price = [&](const GeneratorSpec& g, std::vector<double> f) {
        return solve_lattice_values(lat, g, std::move(f), n, 0).y0();
    };
    auto total = [&](const std::vector<double>& f) {
        std::vector<double> rest(rt.xi_values.size());
        for (std::size_t i = 0; i < rest.size(); ++i)
            rest[i] = rt.xi_values[i] - f[i];
        return price(rt.g1, std::move(rest)) + price(rt.g2, f);
    };

    AuditReport rep;
    rep.constructed_gap = total(rt.f2) - rt.combined_value;

    double sup = 0.0;
    for (double v : rt.xi_values) sup = std::max(sup, std::abs(v));

    std::vector<std::vector<double>> candidates;
    candidates.emplace_back(rt.xi_values.size(), 0.0);
    candidates.push_back(rt.f2);
    for (double shift : {-0.5, 0.5}) {
        std::vector<double> f = rt.f2;
        for (double& v : f) v += shift;
        candidates.push_back(std::move(f));
    }

    SeededRng rng(seed);
    const double sd = lat.sqrt_dt();
    for (int tcase = 0; tcase < trials; ++tcase) {
        const double aa = rng.uniform(-2.0, 2.0);
        const double ee = rng.uniform(-1.0, 1.0);
        const double scale = rng.uniform(0.0, std::max(1.0, 2.0 * sup));
        std::vector<double> d(static_cast<std::size_t>(lat.mark_count()));
        for (double& dj : d) dj = rng.uniform(-1.0, 1.0);
        std::vector<double> f(rt.xi_values.size(), 0.0);
        lat.for_each_state(
            n, [&](std::size_t node, int b, std::span<const int> c) {
                double s = aa * sd * b + ee;
                for (std::size_t j = 0; j < d.size(); ++j)
                    s += d[j] * static_cast<double>(c[j]);
                f[node] = scale * std::tanh(s);
            });
        candidates.push_back(std::move(f));
    }

    double min_slack = std::numeric_limits<double>::infinity();
    for (const auto& f : candidates)
        min_slack = std::min(min_slack, total(f) - rt.combined_value);
    rep.candidates = static_cast<int>(candidates.size());
    rep.min_slack = min_slack;
    rep.constructed_is_minimal = rep.constructed_gap <= min_slack + 1e-8;
    return rep;
}

} // namespace qbsdej
