#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qbsdej/duality.hpp"
#include "qbsdej/g_expectation.hpp"
#include "qbsdej/lattice.hpp"
#include "qbsdej/solver.hpp"

namespace qbsdej {

/// A process adapted to the lattice: one value per node per slice,
/// values[k] sized like slice k for k = 0 .. n.
struct AdaptedProcess {
    std::vector<std::vector<double>> values;
};

/// X_k = Y_k + slope * t_k on every node; a g-submartingale for slope > 0
/// under y-free generators.
AdaptedProcess drifted_process(const Lattice& lat, const LatticeSolution& sol,
                               double slope);

enum class ProcessClass { martingale, submartingale, supermartingale, neither };

struct Classification {
    ProcessClass type = ProcessClass::neither;
    /// Worst positive / negative one-step excess E^g_k[X_{k+1}] - X_k.
    double max_up = 0.0;
    double max_down = 0.0;
};

Classification classify_process(const GExpectation& ge,
                                const AdaptedProcess& x, double tol = 1e-10);

struct DoobMeyer {
    ProcessClass type = ProcessClass::neither;
    /// Martingale representation coefficients of X, z[k][node] and
    /// u[k][node * m + j].
    std::vector<std::vector<double>> z, u;
    /// Predictable increments a_incr[k][node] = E^g_k[X_{k+1}] - X_k and
    /// the forward-accumulated compensator a[k][node] with a[0] = {0}.
    std::vector<std::vector<double>> a_incr, a;
    /// Cross-parent disagreement met while accumulating a (zero when the
    /// compensator is a true node function).
    double a_consistency = 0.0;
    /// Worst pathwise defect of
    /// X_k = X_{k+1} + g dt - Z dB - U d(compensated jumps) - da.
    double max_recon_residual = 0.0;
};

/// Nonlinear Doob-Meyer decomposition of a g-sub/supermartingale. Throws
/// std::invalid_argument when the one-step increments change sign beyond
/// tol (the input is neither a sub- nor a supermartingale).
DoobMeyer doob_meyer(const GExpectation& ge, const AdaptedProcess& x,
                     double tol = 1e-10);

/// Completed upcrossings of [a, b] along a sample path: a crossing counts
/// once the path has visited (-inf, a] and then reaches [b, inf).
int count_upcrossings(std::span<const double> xs, double a, double b);

/// E[U_a^b(X)] exactly, by a forward phase expansion over (node, armed)
/// states with the same completion rule as count_upcrossings.
double expected_upcrossings(const Lattice& lat, const AdaptedProcess& x,
                            double a, double b);

/// Same expectation under the tilted measure Q^{mu,v}.
double expected_upcrossings(const ShiftedLattice& shifted,
                            const AdaptedProcess& x, double a, double b);

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
};

/// Monte Carlo estimate of E[U_a^b(X)] by sampling lattice branches with
/// the counter RNG; bitwise reproducible for a fixed seed.
McEstimate expected_upcrossings_mc(const Lattice& lat,
                                   const AdaptedProcess& x, double a,
                                   double b, std::size_t paths,
                                   std::uint64_t seed);

struct UpcrossingReport {
    double a = 0.0, b = 0.0, theta = 0.0;
    double expected_count = 0.0;
    double standard_error = 0.0; ///< zero when the count is exact
    double bound = 0.0;
    double margin = 0.0; ///< bound - expected_count
    double x_sup = 0.0;
    double gamma = 0.0, m = 0.0, beta = 0.0;
    double j_const = 0.0;  ///< gamma M (e^{beta T}-1)/beta + gamma e^{beta T} ||X||
    double k_theta = 0.0;  ///< reported drift constant, max(C_y, M) by default
};

/// Checks the dominated-count inequality for a bounded g-submartingale:
///   E[U_a^b(X)] <= (exp(q ||X||) + exp(q |a|)) / (exp(q b) - exp(q a)),
/// q = gamma theta / (1 - theta), theta in (0, 1). The left side is the
/// exact phase expansion. Requires b > a and 0 < theta < 1.
UpcrossingReport verify_upcrossing_bound(const GExpectation& ge,
                                         const AdaptedProcess& x, double a,
                                         double b, double theta);

struct DensityBoundReport {
    double expected_count = 0.0; ///< under the tilted measure
    double bound = 0.0;          ///< (||X|| + 2k(J+1)T + |a|) / (b - a)
    double margin = 0.0;
    double k_used = 0.0;
    double j_const = 0.0;
};

/// The density-weighted count inequality, available when the generator's
/// slope processes are explicit (linear and Royer built-ins): the tilt is
/// assembled from the subgradient of g along the representation
/// coefficients of X and the count is taken under that measure. k defaults
/// to max(Lipschitz-in-y constant, M).
DensityBoundReport verify_upcrossing_density_bound(
    const GExpectation& ge, const AdaptedProcess& x, double a, double b,
    std::optional<double> k = std::nullopt);

} // namespace qbsdej
