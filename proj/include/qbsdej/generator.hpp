#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "qbsdej/mark_space.hpp"

namespace qbsdej {

/// Kernel bounds for the jump-difference domination condition: difference
/// quotients of g in each u_j, per unit of compensator mass w_j(t) and
/// normalized by chi_j = 1 /\ |x_j|, stay within [c1, c2] with c1 >= -1 + delta.
struct RoyerBounds {
    double c1 = 0.0;
    double c2 = 0.0;
    double delta = 0.0;
};

/// Growth and regularity certificate declared alongside a generator:
///   -m - beta|y| - (gamma/2)|z|^2 - j_t(-gamma u)/gamma
///     <= g(t,y,z,u) - g(t,0,0,0)
///     <= m + beta|y| + (gamma/2)|z|^2 + j_t(gamma u)/gamma,
/// |g(t,y,.) - g(t,y',.)| <= lipschitz_y |y - y'|.
/// The constants are certificates, not infima; any weaker envelope that
/// still sandwiches g is equally valid.
struct AssumptionProfile {
    double m = 0.0;
    double beta = 0.0;
    double gamma = 1.0;
    double lipschitz_y = 0.0;
    std::optional<RoyerBounds> royer;
};

/// A driver g_t(y,z,u) with structural flags, growth profile, and an
/// optional analytic subgradient in (z,u). Evaluation must be pure; specs
/// are freely copied and shared across threads.
struct GeneratorSpec {
    enum class Builtin { none, entropic, linear, royer };

    std::string name;
    MarkSpace marks;
    std::function<double(double t, double y, double z, std::span<const double> u)>
        evaluate;

    bool depends_on_y = false;
    bool convex_in_zu = false;
    bool concave_in_zu = false;
    bool positively_homogeneous = false;

    AssumptionProfile profile;

    Builtin builtin = Builtin::none;
    double param1 = 0.0; // theta | a | eta
    double param2 = 0.0; // (unused) | b | c1

    /// Fills v (one slot per mark) and returns mu such that (mu, v) is a
    /// subgradient of (z,u) -> g(t, y, z, u); empty when not declared.
    std::function<double(double t, double z, std::span<const double> u,
                         std::span<double> v)>
        subgradient;

    double operator()(double t, double y, double z,
                      std::span<const double> u) const {
        return evaluate(t, y, z, u);
    }
};

/// Entropic driver with risk tolerance theta > 0:
///   g(t,z,u) = |z|^2 / (2 theta) + theta * j_t(u / theta).
GeneratorSpec entropic_generator(double theta, MarkSpace marks);

/// Linear driver g(t,z,u) = a z + b * sum_j w_j(t) (1 /\ |x_j|) u_j.
/// Requires b > -1 so the implied jump tilt 1 + b (1 /\ |x|) stays positive.
GeneratorSpec linear_generator(double a, double b, MarkSpace marks);

/// Positively homogeneous convex driver
///   g(t,z,u) = eta |z| + eta sum_j w_j(t) chi_j u_j^+ - c1 sum_j w_j(t) chi_j u_j^-
/// with eta > 0 and c1 in (-1, 0].
GeneratorSpec royer_generator(double eta, double c1, MarkSpace marks);

/// Legendre-Fenchel conjugate in (z,u):
///   G_t(mu, v) = sup_{z,u} { mu z + <v,u>_t - g_t(z,u) }.
/// Closed forms for the built-ins; damped gradient ascent with central
/// finite differences otherwise (gradient tolerance 1e-8, at most 10^4
/// iterations). Returns +infinity when the supremum is unbounded; throws
/// NumericalError when the ascent fails to converge.
double legendre_transform(const GeneratorSpec& g, double t, double mu,
                          std::span<const double> v);

struct CheckReport {
    bool checked = false;
    bool passed = true;
    double max_violation = 0.0;
    int samples = 0;
};

struct ValidationReport {
    CheckReport growth;
    CheckReport lipschitz_y;
    CheckReport convexity;
    CheckReport royer;
    bool all_passed() const {
        return growth.passed && lipschitz_y.passed && convexity.passed &&
               royer.passed;
    }
};

/// Samples (t,y,z,u) and checks the declared certificate: growth sandwich,
/// Lipschitz-in-y bound, midpoint convexity (when flagged) and the jump
/// kernel bounds (when declared). Failures land in the report; only
/// malformed inputs throw.
ValidationReport validate_assumptions(const GeneratorSpec& g,
                                      const AssumptionProfile& profile,
                                      int samples, std::uint64_t seed);

} // namespace qbsdej
