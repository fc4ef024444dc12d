#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qbsdej/g_expectation.hpp"
#include "qbsdej/generator.hpp"
#include "qbsdej/lattice.hpp"
#include "qbsdej/solver.hpp"

namespace qbsdej {

/// A predictable measure change (mu, v): mu tilts the Brownian increment,
/// v tilts the jump intensities (w_j -> w_j (1 + v_j)). Indexed per slice
/// and node, mu[k][node] and v[k][node * m + j] for k = 0 .. n-1.
struct MeasureChange {
    std::vector<std::vector<double>> mu;
    std::vector<std::vector<double>> v;
};

/// Constant (mu, v) across all slices and nodes.
MeasureChange constant_measure_change(const Lattice& lat, double mu,
                                      std::span<const double> v);

/// The lattice reweighted under the equivalent measure Q^{mu,v}. One-step
/// branch probabilities become
///   no-jump:  (1 - lambda' dt) (1 +- mu sqrt(dt)) / 2
///   jump j:   w_j (1 + v_j) dt (1 +- mu sqrt(dt)) / 2
/// with lambda' = sum_j w_j (1 + v_j); they sum to one exactly and give
/// E'[dB] = mu dt exactly. Construction validates admissibility at every
/// node: |mu| sqrt(dt) < 1, v_j > -1, lambda' dt < 1.
class ShiftedLattice {
  public:
    ShiftedLattice(const Lattice& lat, MeasureChange mc);

    const Lattice& base() const { return *lat_; }
    const MeasureChange& change() const { return mc_; }

    double probability(int k, std::size_t node, int branch) const;

    /// One-step density dQ/dP along a branch (Q prob / P prob).
    double tilt(int k, std::size_t node, int branch) const;

    /// Forward state probabilities under Q, per slice.
    std::vector<std::vector<double>> forward_probabilities() const;

    /// Node-level density Gamma_k(node) = Q_k(node) / P_k(node), zero on
    /// states unreachable under both measures. E[Gamma_n] = 1 exactly.
    std::vector<std::vector<double>> gamma() const;

  private:
    const Lattice* lat_;
    MeasureChange mc_;
};

/// Validates and wraps (lat, mc); throws std::invalid_argument naming the
/// first inadmissible slice/node.
ShiftedLattice girsanov_shift(const Lattice& lat, const MeasureChange& mc);

/// The penalized dual value
///   E_Q[xi] - sum_k G(t_k, mu_k, v_k) dt
/// computed by backward induction under Q; a lower bound on E^g_0[xi] for
/// every admissible (mu, v) when g is convex. Returns -infinity when the
/// conjugate G is infinite somewhere reachable.
double dual_lower_bound(const GExpectation& ge, const TerminalCondition& xi,
                        const MeasureChange& mc);

/// The maximizing density read off the solved field: (mu, v) in the
/// subdifferential of g at (Z_k, U_k) per node, from the declared
/// subgradient when available, else by central finite differences
/// ((d/du_j) g / w_j with v_j = 0 where w_j = 0). Throws
/// std::invalid_argument naming the first node whose density is
/// inadmissible on the lattice.
MeasureChange optimal_density(const Lattice& lat, const GeneratorSpec& g,
                              const LatticeSolution& sol);

} // namespace qbsdej
