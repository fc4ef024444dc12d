#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qbsdej/mark_space.hpp"
#include "qbsdej/time_grid.hpp"

namespace qbsdej {

/// One recombined node: signed Brownian up-count b (B value = b*sqrt(dt))
/// and per-mark jump counts. At slice k, |b| <= k with b = k (mod 2) and
/// sum(counts) <= k, because every step carries exactly one Brownian move
/// and at most one jump.
struct LatticeState {
    int brownian = 0;
    std::vector<int> counts;
};

/// Recombining event lattice for a Brownian motion plus an integer-valued
/// random measure on a finite mark space.
///
/// Each node at slice k has 2(m+1) branches: Brownian up/down without a jump
/// (probability (1 - lambda(t_k) dt)/2 each) and Brownian up/down combined
/// with a jump of mark j (probability w_j(t_k) dt / 2 each). The one-step
/// Brownian increment therefore has mean 0 and variance dt exactly, the
/// jump indicator of mark j has mean w_j(t_k) dt, and the two are
/// independent. Slice k holds (k+1) * C(k+m, m) nodes.
///
/// Branch encoding: branch = 2*f + s with f = 0 (no jump) or f = j+1
/// (jump of mark j) and s = 0 (up) / 1 (down).
class Lattice {
  public:
    Lattice(TimeGrid grid, MarkSpace marks);

    const TimeGrid& grid() const { return grid_; }
    const MarkSpace& marks() const { return marks_; }
    int steps() const { return grid_.steps; }
    int mark_count() const { return marks_.size(); }
    double sqrt_dt() const { return sqrt_dt_; }

    std::size_t slice_size(int k) const;
    /// Number of jump-count vectors with sum <= k: C(k+m, m).
    std::size_t count_vectors(int k) const;

    int branch_count() const { return 2 * (mark_count() + 1); }
    int branch_brownian_sign(int branch) const { return (branch & 1) ? -1 : 1; }
    /// Mark index of the branch, or -1 for the pure Brownian branches.
    int branch_mark(int branch) const { return branch / 2 - 1; }
    double branch_probability(int k, int branch) const;

    /// Jump intensity lambda(t_k), cached per slice.
    double intensity(int k) const { return intensity_[static_cast<std::size_t>(k)]; }
    double weight(int j, int k) const {
        return weights_[static_cast<std::size_t>(k) * static_cast<std::size_t>(mark_count()) +
                        static_cast<std::size_t>(j)];
    }

    LatticeState state(int k, std::size_t node) const;
    std::size_t index_of(int k, const LatticeState& s) const;
    double brownian_value(int k, std::size_t node) const;

    /// Child node index in slice k+1 for a decoded parent state.
    std::size_t child_index(int k, const LatticeState& s, int branch) const;

    /// Lexicographic rank of a jump-count vector within {sum <= bound}.
    std::size_t rank_counts(std::span<const int> counts, int bound) const;

    /// Advance a count vector to its lexicographic successor within
    /// {sum <= bound}; returns false after the last one.
    static bool next_counts(std::span<int> counts, int bound);

    /// Per-slice table of child count-ranks, laid out as
    /// [cRank * (m+1) + f] with f = 0 for no jump and f = j+1 for mark j.
    /// Lets sweeps resolve all children of node (bIdx, cRank) as
    /// (bIdx + {1,0}) * count_vectors(k+1) + table[cRank*(m+1) + f].
    std::vector<std::size_t> child_count_ranks(int k) const;

    /// Enumerate slice k in index order; fn(node, brownian, counts).
    template <class Fn> void for_each_state(int k, Fn&& fn) const {
        const std::size_t nc = count_vectors(k);
        std::vector<int> counts(static_cast<std::size_t>(mark_count()), 0);
        for (int bidx = 0; bidx <= k; ++bidx) {
            const int b = 2 * bidx - k;
            std::fill(counts.begin(), counts.end(), 0);
            std::size_t node = static_cast<std::size_t>(bidx) * nc;
            do {
                fn(node, b, std::span<const int>(counts));
                ++node;
            } while (next_counts(counts, k));
        }
    }

    /// Probability of each node under the reference measure, by forward
    /// induction from the root. Slice k of the result has slice_size(k)
    /// entries summing to one.
    std::vector<std::vector<double>> forward_probabilities() const;

  private:
    std::int64_t binom(int n, int r) const;
    std::size_t count_le(int len, int sum) const; // #{length-len vectors, sum <= sum}

    TimeGrid grid_;
    MarkSpace marks_;
    double sqrt_dt_ = 1.0;
    std::vector<double> intensity_;          // per slice k = 0..n-1
    std::vector<double> weights_;            // [k * m + j]
    std::vector<std::int64_t> binom_table_;  // flattened (n+m+2)^2 lower triangle
    int binom_rows_ = 0;
};

} // namespace qbsdej
