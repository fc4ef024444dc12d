#pragma once

// Internal helper bundling the per-slice child-resolution data that forward
// and backward walks over the lattice keep needing together.

#include <cstddef>
#include <vector>

#include "qbsdej/lattice.hpp"

namespace qbsdej::detail {

struct SliceTopo {
    std::size_t nc = 0;      // count vectors at slice k
    std::size_t nc_next = 0; // count vectors at slice k+1
    int m = 0;
    std::vector<std::size_t> table; // child count-ranks, [crank*(m+1)+f]
    std::vector<double> prob;       // reference branch probabilities

    std::size_t child(std::size_t node, int branch) const {
        const std::size_t bidx = node / nc;
        const std::size_t base =
            ((branch & 1) ? bidx : bidx + 1) * nc_next;
        return base + table[(node % nc) * static_cast<std::size_t>(m + 1) +
                            static_cast<std::size_t>(branch / 2)];
    }
};

inline SliceTopo slice_topo(const Lattice& lat, int k) {
    SliceTopo t;
    t.nc = lat.count_vectors(k);
    t.nc_next = lat.count_vectors(k + 1);
    t.m = lat.mark_count();
    t.table = lat.child_count_ranks(k);
    t.prob.resize(static_cast<std::size_t>(lat.branch_count()));
    for (int br = 0; br < lat.branch_count(); ++br)
        t.prob[static_cast<std::size_t>(br)] = lat.branch_probability(k, br);
    return t;
}

} // namespace qbsdej::detail
