// Times the OpenMP backward-induction kernel against the serial reference
// on a family of lattice sizes and checks that the two produce bitwise
// identical solutions. Build and run manually; not part of the test suite.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qbsdej/generator.hpp"
#include "qbsdej/lattice.hpp"
#include "qbsdej/solver.hpp"

using namespace qbsdej;
using clock_type = std::chrono::steady_clock;

namespace {

template <class Fn>
double best_of(int reps, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock_type::now();
        fn();
        const double s = std::chrono::duration<double>(clock_type::now() - t0).count();
        if (s < best) best = s;
    }
    return best;
}

bool identical(const LatticeSolution& a, const LatticeSolution& b) {
    return a.y == b.y && a.z == b.z && a.u == b.u;
}

}  // namespace

int main() {
    const MarkSpace marks({0.5, -1.0}, std::vector<double>{0.3, 0.2});
    const GeneratorSpec g = entropic_generator(1.0, marks);
    TerminalCondition xi;
    xi.payoff = [](double b, std::span<const int> counts) {
        return 0.4 * std::tanh(b) + 0.2 * std::min(counts[0], 2) - 0.15 * std::min(counts[1], 2);
    };
    xi.bound = 1.1;

#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns run serial code\n");
#endif
    std::printf("%6s %12s %12s %12s %9s %10s\n", "steps", "nodes", "serial[s]", "parallel[s]",
                "speedup", "bitwise");

    bool all_identical = true;
    for (int n : {24, 32, 40, 48, 56}) {
        Lattice lat(TimeGrid(1.0, n), marks);
        std::size_t nodes = 0;
        for (int k = 0; k <= n; ++k) nodes += lat.slice_size(k);

        LatticeSolution serial, parallel;
        // one warm pass each, then best of three timed passes
        serial = ref::solve_lattice(lat, g, xi);
        parallel = solve_lattice(lat, g, xi);
        const double ts = best_of(3, [&] { serial = ref::solve_lattice(lat, g, xi); });
        const double tp = best_of(3, [&] { parallel = solve_lattice(lat, g, xi); });

        const bool same = identical(serial, parallel);
        all_identical = all_identical && same;
        std::printf("%6d %12zu %12.4f %12.4f %9.2f %10s\n", n, nodes, ts, tp, ts / tp,
                    same ? "yes" : "NO");
    }

    std::printf(all_identical ? "parallel and serial solutions agree bitwise\n"
                              : "MISMATCH between parallel and serial solutions\n");
    return all_identical ? 0 : 1;
}
