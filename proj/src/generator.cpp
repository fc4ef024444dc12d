#include "qbsdej/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qbsdej/errors.hpp"
#include "qbsdej/numerics.hpp"

namespace qbsdej {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double chi(double x) { return std::min(1.0, std::abs(x)); }

// (1+v)ln(1+v) - v, the convex conjugate of u -> e^u - 1 - u, extended by
// its limit value 1 at v = -1 and +infinity below.
double conj_exp(double v) {
    if (v < -1.0) return kInf;
    if (v == -1.0) return 1.0;
    return (1.0 + v) * std::log1p(v) - v;
}

} // namespace

GeneratorSpec entropic_generator(double theta, MarkSpace marks) {
    if (!(theta > 0.0))
        throw std::invalid_argument("entropic_generator: theta must be > 0");
    GeneratorSpec g;
    g.name = "entropic";
    g.marks = marks;
    g.builtin = GeneratorSpec::Builtin::entropic;
    g.param1 = theta;
    g.convex_in_zu = true;
    g.profile.gamma = 1.0 / theta;

    const MarkSpace mk = std::move(marks);
    g.evaluate = [mk, theta](double t, double /*y*/, double z,
                             std::span<const double> u) {
        double s = z * z / (2.0 * theta);
        for (int j = 0; j < mk.size(); ++j) {
            const double uj = u[static_cast<std::size_t>(j)] / theta;
            s += theta * mk.weight(j, t) * (std::expm1(uj) - uj);
        }
        return s;
    };
    g.subgradient = [theta](double /*t*/, double z, std::span<const double> u,
                            std::span<double> v) {
        for (std::size_t j = 0; j < u.size(); ++j)
            v[j] = std::expm1(u[j] / theta);
        return z / theta;
    };
    return g;
}

GeneratorSpec linear_generator(double a, double b, MarkSpace marks) {
    if (!(b > -1.0))
        throw std::invalid_argument(
            "linear_generator: b must be > -1 so the jump tilt 1 + b(1 /\\ |x|) "
            "stays positive");
    GeneratorSpec g;
    g.name = "linear";
    g.marks = marks;
    g.builtin = GeneratorSpec::Builtin::linear;
    g.param1 = a;
    g.param2 = b;
    g.convex_in_zu = true;
    g.concave_in_zu = true;
    g.positively_homogeneous = true;

    g.profile.gamma = 1.0;
    double m = a * a / 2.0;
    for (int j = 0; j < g.marks.size(); ++j)
        m += g.marks.max_weight(j) * conj_exp(b * chi(g.marks.mark(j)));
    g.profile.m = m;
    g.profile.royer =
        RoyerBounds{std::min(b, 0.0), std::max(b, 0.0), 1.0 + std::min(b, 0.0)};

    const MarkSpace mk = std::move(marks);
    g.evaluate = [mk, a, b](double t, double /*y*/, double z,
                            std::span<const double> u) {
        double s = a * z;
        for (int j = 0; j < mk.size(); ++j)
            s += b * mk.weight(j, t) * chi(mk.mark(j)) *
                 u[static_cast<std::size_t>(j)];
        return s;
    };
    std::vector<double> vfix(static_cast<std::size_t>(g.marks.size()));
    for (int j = 0; j < g.marks.size(); ++j)
        vfix[static_cast<std::size_t>(j)] = b * chi(g.marks.mark(j));
    g.subgradient = [a, vfix](double /*t*/, double /*z*/,
                              std::span<const double> /*u*/,
                              std::span<double> v) {
        std::copy(vfix.begin(), vfix.end(), v.begin());
        return a;
    };
    return g;
}

GeneratorSpec royer_generator(double eta, double c1, MarkSpace marks) {
    if (!(eta > 0.0))
        throw std::invalid_argument("royer_generator: eta must be > 0");
    if (!(c1 > -1.0 && c1 <= 0.0))
        throw std::invalid_argument("royer_generator: c1 must lie in (-1, 0]");
    GeneratorSpec g;
    g.name = "royer";
    g.marks = marks;
    g.builtin = GeneratorSpec::Builtin::royer;
    g.param1 = eta;
    g.param2 = c1;
    g.convex_in_zu = true;
    g.positively_homogeneous = true;

    g.profile.gamma = 1.0;
    double m = eta * eta / 2.0;
    for (int j = 0; j < g.marks.size(); ++j) {
        const double cj = chi(g.marks.mark(j));
        m += g.marks.max_weight(j) *
             std::max(conj_exp(eta * cj), conj_exp(c1 * cj));
    }
    g.profile.m = m;
    g.profile.royer = RoyerBounds{c1, eta, 1.0 + c1};

    const MarkSpace mk = std::move(marks);
    g.evaluate = [mk, eta, c1](double t, double /*y*/, double z,
                               std::span<const double> u) {
        double s = eta * std::abs(z);
        for (int j = 0; j < mk.size(); ++j) {
            const double uj = u[static_cast<std::size_t>(j)];
            const double cj = chi(mk.mark(j));
            s += mk.weight(j, t) * cj *
                 (eta * std::max(uj, 0.0) - c1 * std::max(-uj, 0.0));
        }
        return s;
    };
    std::vector<double> chis(static_cast<std::size_t>(g.marks.size()));
    for (int j = 0; j < g.marks.size(); ++j)
        chis[static_cast<std::size_t>(j)] = chi(g.marks.mark(j));
    g.subgradient = [eta, c1, chis](double /*t*/, double z,
                                    std::span<const double> u,
                                    std::span<double> v) {
        for (std::size_t j = 0; j < u.size(); ++j)
            v[j] = u[j] > 0.0 ? eta * chis[j] : (u[j] < 0.0 ? c1 * chis[j] : 0.0);
        return z > 0.0 ? eta : (z < 0.0 ? -eta : 0.0);
    };
    return g;
}

namespace {

// Damped gradient ascent on phi(z,u) = mu z + <v,u>_t - g(t,0,z,u) with
// central finite-difference gradients. Declares the sup unbounded when the
// iterate escapes a large ball.
double numeric_conjugate(const GeneratorSpec& g, double t, double mu,
                         std::span<const double> v) {
    const int m = g.marks.size();
    const std::size_t dim = 1 + static_cast<std::size_t>(m);
    std::vector<double> x(dim, 0.0), grad(dim, 0.0), trial(dim, 0.0);

    auto phi = [&](const std::vector<double>& p) {
        const double z = p[0];
        std::span<const double> u(p.data() + 1, static_cast<std::size_t>(m));
        double s = mu * z - g.evaluate(t, 0.0, z, u);
        for (int j = 0; j < m; ++j)
            s += g.marks.weight(j, t) * v[static_cast<std::size_t>(j)] *
                 u[static_cast<std::size_t>(j)];
        return s;
    };

    const double h = 1e-5;
    double fx = phi(x);
    double step = 1.0;
    for (int iter = 0; iter < 10000; ++iter) {
        double gnorm = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            trial = x;
            trial[i] = x[i] + h;
            const double fp = phi(trial);
            trial[i] = x[i] - h;
            const double fm = phi(trial);
            grad[i] = (fp - fm) / (2.0 * h);
            gnorm = std::max(gnorm, std::abs(grad[i]));
        }
        if (gnorm <= 1e-8) return fx;

        bool moved = false;
        for (; step > 1e-14; step /= 2.0) {
            for (std::size_t i = 0; i < dim; ++i)
                trial[i] = x[i] + step * grad[i];
            const double ft = phi(trial);
            if (ft > fx) {
                x = trial;
                fx = ft;
                moved = true;
                step *= 4.0;
                break;
            }
        }
        if (!moved)
            throw NumericalError(
                "legendre_transform: gradient ascent stalled before reaching "
                "the 1e-8 gradient tolerance");
        double xnorm = 0.0;
        for (double c : x) xnorm = std::max(xnorm, std::abs(c));
        if (xnorm > 1e6) return kInf;
    }
    throw NumericalError(
        "legendre_transform: gradient ascent did not converge within 10000 "
        "iterations");
}

} // namespace

double legendre_transform(const GeneratorSpec& g, double t, double mu,
                          std::span<const double> v) {
    const MarkSpace& mk = g.marks;
    switch (g.builtin) {
        case GeneratorSpec::Builtin::entropic: {
            const double theta = g.param1;
            double s = theta * mu * mu / 2.0;
            for (int j = 0; j < mk.size(); ++j) {
                const double w = mk.weight(j, t);
                if (w == 0.0) continue;
                const double c = conj_exp(v[static_cast<std::size_t>(j)]);
                if (c == kInf) return kInf;
                s += theta * w * c;
            }
            return s;
        }
        case GeneratorSpec::Builtin::linear: {
            if (mu != g.param1) return kInf;
            for (int j = 0; j < mk.size(); ++j)
                if (mk.weight(j, t) > 0.0 &&
                    v[static_cast<std::size_t>(j)] != g.param2 * chi(mk.mark(j)))
                    return kInf;
            return 0.0;
        }
        case GeneratorSpec::Builtin::royer: {
            const double eta = g.param1;
            const double c1 = g.param2;
            if (std::abs(mu) > eta) return kInf;
            for (int j = 0; j < mk.size(); ++j) {
                if (mk.weight(j, t) <= 0.0) continue;
                const double cj = chi(mk.mark(j));
                const double vj = v[static_cast<std::size_t>(j)];
                if (vj < c1 * cj || vj > eta * cj) return kInf;
            }
            return 0.0;
        }
        case GeneratorSpec::Builtin::none:
            break;
    }
    if (!g.convex_in_zu)
        throw std::invalid_argument(
            "legendre_transform: generator must be convex in (z,u)");
    return numeric_conjugate(g, t, mu, v);
}

ValidationReport validate_assumptions(const GeneratorSpec& g,
                                      const AssumptionProfile& profile,
                                      int samples, std::uint64_t seed) {
    if (samples < 1)
        throw std::invalid_argument("validate_assumptions: samples must be >= 1");
    if (!(profile.gamma > 0.0) || profile.beta < 0.0 || profile.m < 0.0)
        throw std::invalid_argument(
            "validate_assumptions: profile needs gamma > 0, beta >= 0, m >= 0");
    if (profile.royer && !(profile.royer->delta > 0.0 &&
                           profile.royer->c1 >= -1.0 + profile.royer->delta))
        throw std::invalid_argument(
            "validate_assumptions: royer bounds need delta > 0 and "
            "c1 >= -1 + delta");

    ValidationReport rep;
    rep.growth.checked = true;
    rep.lipschitz_y.checked = true;
    rep.convexity.checked = g.convex_in_zu;
    rep.royer.checked = profile.royer.has_value() && g.marks.size() > 0;

    const int m = g.marks.size();
    const double gam = profile.gamma;
    const double zrange = 10.0 * std::max(1.0, gam);
    const double tol = 1e-9;

    SeededRng rng(seed);
    std::vector<double> u(static_cast<std::size_t>(m)),
        u2(static_cast<std::size_t>(m)), umid(static_cast<std::size_t>(m)),
        uz(static_cast<std::size_t>(m), 0.0);

    auto record = [&](CheckReport& c, double violation) {
        ++c.samples;
        c.max_violation = std::max(c.max_violation, violation);
        if (violation > tol) c.passed = false;
    };

    for (int s = 0; s < samples; ++s) {
        const double t = rng.uniform(0.0, 2.0);
        const double y = rng.uniform(-5.0, 5.0);
        const double y2 = rng.uniform(-5.0, 5.0);
        const double z = rng.uniform(-zrange, zrange);
        const double z2 = rng.uniform(-zrange, zrange);
        for (int j = 0; j < m; ++j) {
            u[static_cast<std::size_t>(j)] = rng.uniform(-3.0, 3.0);
            u2[static_cast<std::size_t>(j)] = rng.uniform(-3.0, 3.0);
        }

        const double base = g.evaluate(t, 0.0, 0.0, uz);
        const double val = g.evaluate(t, y, z, u);

        double jpos = 0.0, jneg = 0.0;
        for (int j = 0; j < m; ++j) {
            const double w = g.marks.weight(j, t);
            const double uj = u[static_cast<std::size_t>(j)];
            jpos += w * (std::expm1(gam * uj) - gam * uj);
            jneg += w * (std::expm1(-gam * uj) + gam * uj);
        }
        const double envelope = profile.m + profile.beta * std::abs(y) +
                                0.5 * gam * z * z;
        const double upper = envelope + jpos / gam;
        const double lower = -envelope - jneg / gam;
        record(rep.growth,
               std::max(val - base - upper, lower - (val - base)));

        const double valy2 = g.evaluate(t, y2, z, u);
        record(rep.lipschitz_y, std::abs(val - valy2) -
                                    profile.lipschitz_y * std::abs(y - y2));

        if (rep.convexity.checked) {
            for (int j = 0; j < m; ++j)
                umid[static_cast<std::size_t>(j)] =
                    0.5 * (u[static_cast<std::size_t>(j)] +
                           u2[static_cast<std::size_t>(j)]);
            const double mid = g.evaluate(t, y, 0.5 * (z + z2), umid);
            const double avg =
                0.5 * (val + g.evaluate(t, y, z2, u2));
            record(rep.convexity, mid - avg);
        }

        if (rep.royer.checked) {
            const int j = s % m;
            const double w = g.marks.weight(j, t);
            const double cj = chi(g.marks.mark(j));
            const double du = u[static_cast<std::size_t>(j)] -
                              u2[static_cast<std::size_t>(j)];
            if (w > 0.0 && std::abs(du) > 1e-6) {
                umid = u;
                umid[static_cast<std::size_t>(j)] =
                    u2[static_cast<std::size_t>(j)];
                const double slope =
                    (val - g.evaluate(t, y, z, umid)) / (w * cj * du);
                record(rep.royer, std::max(profile.royer->c1 - slope,
                                           slope - profile.royer->c2));
            }
        }
    }
    return rep;
}

} // namespace qbsdej
