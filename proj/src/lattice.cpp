#include "qbsdej/lattice.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace qbsdej {

Lattice::Lattice(TimeGrid grid, MarkSpace marks)
    : grid_(grid), marks_(std::move(marks)) {
    sqrt_dt_ = std::sqrt(grid_.dt);
    const int n = grid_.steps;
    const int m = marks_.size();

    intensity_.resize(static_cast<std::size_t>(n));
    weights_.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
    for (int k = 0; k < n; ++k) {
        const double t = grid_.time(k);
        double lam = 0.0;
        for (int j = 0; j < m; ++j) {
            const double w = marks_.weight(j, t);
            weights_[static_cast<std::size_t>(k) * static_cast<std::size_t>(m) +
                     static_cast<std::size_t>(j)] = w;
            lam += w;
        }
        intensity_[static_cast<std::size_t>(k)] = lam;
        if (!(lam * grid_.dt < 1.0)) {
            std::ostringstream msg;
            msg << "Lattice: lambda(t_k) * dt = " << lam * grid_.dt
                << " >= 1 at k = " << k
                << "; the thinning construction needs lambda * dt < 1, refine "
                   "the time grid";
            throw std::invalid_argument(msg.str());
        }
    }

    binom_rows_ = n + m + 2;
    binom_table_.assign(static_cast<std::size_t>(binom_rows_) *
                            static_cast<std::size_t>(binom_rows_),
                        0);
    for (int i = 0; i < binom_rows_; ++i) {
        binom_table_[static_cast<std::size_t>(i) * binom_rows_] = 1;
        for (int r = 1; r <= i; ++r)
            binom_table_[static_cast<std::size_t>(i) * binom_rows_ + r] =
                binom(i - 1, r - 1) + binom(i - 1, r);
    }
}

std::int64_t Lattice::binom(int n, int r) const {
    if (r < 0 || r > n) return 0;
    return binom_table_[static_cast<std::size_t>(n) * binom_rows_ + r];
}

std::size_t Lattice::count_le(int len, int sum) const {
    if (sum < 0) return 0;
    return static_cast<std::size_t>(binom(sum + len, len));
}

std::size_t Lattice::count_vectors(int k) const {
    return count_le(mark_count(), k);
}

std::size_t Lattice::slice_size(int k) const {
    return static_cast<std::size_t>(k + 1) * count_vectors(k);
}

double Lattice::branch_probability(int k, int branch) const {
    const double dt = grid_.dt;
    const int j = branch_mark(branch);
    if (j < 0) return 0.5 * (1.0 - intensity(k) * dt);
    return 0.5 * weight(j, k) * dt;
}

std::size_t Lattice::rank_counts(std::span<const int> counts, int bound) const {
    std::size_t rank = 0;
    int pre = 0;
    const int m = static_cast<int>(counts.size());
    for (int i = 0; i < m; ++i) {
        const int tail = m - 1 - i;
        const int ci = counts[static_cast<std::size_t>(i)];
        rank += count_le(tail + 1, bound - pre) -
                count_le(tail + 1, bound - pre - ci);
        pre += ci;
    }
    return rank;
}

bool Lattice::next_counts(std::span<int> counts, int bound) {
    const int m = static_cast<int>(counts.size());
    if (m == 0) return false;
    int prefix = 0;
    for (int i = 0; i < m; ++i) prefix += counts[static_cast<std::size_t>(i)];
    for (int i = m - 1; i >= 0; --i) {
        prefix -= counts[static_cast<std::size_t>(i)];
        if (prefix + counts[static_cast<std::size_t>(i)] + 1 <= bound) {
            ++counts[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < m; ++j) counts[static_cast<std::size_t>(j)] = 0;
            return true;
        }
    }
    return false;
}

LatticeState Lattice::state(int k, std::size_t node) const {
    const std::size_t nc = count_vectors(k);
    LatticeState s;
    s.brownian = 2 * static_cast<int>(node / nc) - k;
    std::size_t rank = node % nc;
    const int m = mark_count();
    s.counts.assign(static_cast<std::size_t>(m), 0);
    int pre = 0;
    for (int i = 0; i < m; ++i) {
        const int tail = m - 1 - i;
        const std::size_t whole = count_le(tail + 1, k - pre);
        // cum(v) = #vectors whose i-th coordinate is < v; c_i is the largest
        // v with cum(v) <= rank.
        auto cum = [&](int v) { return whole - count_le(tail + 1, k - pre - v); };
        int v = 0;
        while (v < k - pre && cum(v + 1) <= rank) ++v;
        rank -= cum(v);
        s.counts[static_cast<std::size_t>(i)] = v;
        pre += v;
    }
    if (rank != 0) throw std::logic_error("Lattice::state: bad node index");
    return s;
}

std::size_t Lattice::index_of(int k, const LatticeState& s) const {
    if (std::abs(s.brownian) > k || ((s.brownian + k) & 1))
        throw std::invalid_argument(
            "Lattice::index_of: Brownian count has wrong range or parity");
    if (static_cast<int>(s.counts.size()) != mark_count())
        throw std::invalid_argument("Lattice::index_of: counts size mismatch");
    const int total = std::accumulate(s.counts.begin(), s.counts.end(), 0);
    if (total > k)
        throw std::invalid_argument("Lattice::index_of: jump counts exceed slice");
    const std::size_t bidx = static_cast<std::size_t>((s.brownian + k) / 2);
    return bidx * count_vectors(k) + rank_counts(s.counts, k);
}

double Lattice::brownian_value(int k, std::size_t node) const {
    const std::size_t nc = count_vectors(k);
    const int b = 2 * static_cast<int>(node / nc) - k;
    return b * sqrt_dt_;
}

std::size_t Lattice::child_index(int k, const LatticeState& s, int branch) const {
    const std::size_t nc1 = count_vectors(k + 1);
    const std::size_t bidx = static_cast<std::size_t>((s.brownian + k) / 2) +
                             (branch_brownian_sign(branch) > 0 ? 1u : 0u);
    const int j = branch_mark(branch);
    std::size_t crank;
    if (j < 0) {
        crank = rank_counts(s.counts, k + 1);
    } else {
        LatticeState tmp = s;
        ++tmp.counts[static_cast<std::size_t>(j)];
        crank = rank_counts(tmp.counts, k + 1);
    }
    return bidx * nc1 + crank;
}

std::vector<std::size_t> Lattice::child_count_ranks(int k) const {
    const int m = mark_count();
    const std::size_t nc = count_vectors(k);
    std::vector<std::size_t> table(nc * static_cast<std::size_t>(m + 1));
    std::vector<int> counts(static_cast<std::size_t>(m), 0);
    std::size_t crank = 0;
    do {
        table[crank * (m + 1)] = rank_counts(counts, k + 1);
        for (int j = 0; j < m; ++j) {
            ++counts[static_cast<std::size_t>(j)];
            table[crank * (m + 1) + static_cast<std::size_t>(j) + 1] =
                rank_counts(counts, k + 1);
            --counts[static_cast<std::size_t>(j)];
        }
        ++crank;
    } while (next_counts(counts, k));
    return table;
}

std::vector<std::vector<double>> Lattice::forward_probabilities() const {
    const int n = steps();
    const int m = mark_count();
    std::vector<std::vector<double>> prob(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k)
        prob[static_cast<std::size_t>(k)].assign(slice_size(k), 0.0);
    prob[0][0] = 1.0;
    for (int k = 0; k < n; ++k) {
        const std::size_t nc = count_vectors(k);
        const std::size_t nc1 = count_vectors(k + 1);
        const auto ranks = child_count_ranks(k);
        const auto& cur = prob[static_cast<std::size_t>(k)];
        auto& next = prob[static_cast<std::size_t>(k) + 1];
        for (std::size_t node = 0; node < cur.size(); ++node) {
            if (cur[node] == 0.0) continue;
            const std::size_t bidx = node / nc;
            const std::size_t crank = node % nc;
            for (int br = 0; br < branch_count(); ++br) {
                const std::size_t cbidx = bidx + (branch_brownian_sign(br) > 0 ? 1u : 0u);
                const std::size_t ccrank =
                    ranks[crank * (m + 1) + static_cast<std::size_t>(branch_mark(br) + 1)];
                next[cbidx * nc1 + ccrank] += cur[node] * branch_probability(k, br);
            }
        }
    }
    return prob;
}

} // namespace qbsdej
