#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "qbsdej/lattice.hpp"
#include "qbsdej/mark_space.hpp"
#include "qbsdej/paths.hpp"
#include "qbsdej/time_grid.hpp"

using namespace qbsdej;

TEST_CASE("time grid") {
    TimeGrid g(2.0, 8);
    CHECK(g.dt == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(g.time(0) == 0.0);
    CHECK(g.time(8) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS(TimeGrid(-1.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), std::invalid_argument);
}

TEST_CASE("piecewise constant weights") {
    PiecewiseConstant w({0.5, 1.0}, {0.1, 0.4, 0.2});
    CHECK(w.at(0.0) == 0.1);
    CHECK(w.at(0.499) == 0.1);
    CHECK(w.at(0.5) == 0.4);   // right continuous
    CHECK(w.at(0.999) == 0.4);
    CHECK(w.at(1.0) == 0.2);
    CHECK(w.at(7.0) == 0.2);
    CHECK_THROWS_AS(PiecewiseConstant({1.0, 0.5}, {0.1, 0.2, 0.3}), std::invalid_argument);
    CHECK_THROWS_AS(PiecewiseConstant({0.5}, {0.1}), std::invalid_argument);
}

TEST_CASE("mark space basics") {
    MarkSpace ms({0.5, -1.0}, std::vector<double>{0.3, 0.2});
    CHECK(ms.size() == 2);
    CHECK(ms.mark(1) == -1.0);
    CHECK(ms.weight(0, 0.7) == 0.3);
    CHECK(ms.intensity(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ms.max_weight(1) == 0.2);
    std::vector<double> v = {2.0, 3.0}, u = {1.0, -1.0};
    CHECK(ms.inner(0.0, v, u) == doctest::Approx(0.3 * 2.0 - 0.2 * 3.0).epsilon(1e-14));

    CHECK_THROWS_AS(MarkSpace({0.0}, std::vector<double>{0.1}), std::invalid_argument);
    CHECK_THROWS_AS(MarkSpace({1.0}, std::vector<double>{-0.1}), std::invalid_argument);
    CHECK_THROWS_AS(MarkSpace({1.0}, std::vector<double>{0.1, 0.2}), std::invalid_argument);
}

TEST_CASE("exponential compensator functional") {
    MarkSpace ms({1.0}, std::vector<double>{0.3});
    std::vector<double> zero = {0.0};
    CHECK(j_functional(0.0, zero, ms) == 0.0);

    // w (e^u - 1 - u) at u = ln 2: 0.3 (2 - 1 - ln 2)
    std::vector<double> u = {std::log(2.0)};
    CHECK(j_functional(0.0, u, ms) ==
          doctest::Approx(0.09205584583201641).epsilon(1e-13));

    // nonnegative and convex along a segment
    std::vector<double> a = {-1.2}, b = {0.8}, mid = {-0.2};
    const double ja = j_functional(0.0, a, ms), jb = j_functional(0.0, b, ms);
    CHECK(ja >= 0.0);
    CHECK(j_functional(0.0, mid, ms) <= 0.5 * (ja + jb) + 1e-14);
}

TEST_CASE("lattice slice sizes and branch probabilities") {
    // Frozen case: one step of length 1, one mark with weight 0.2.
    {
        Lattice lat(TimeGrid(1.0, 1), MarkSpace({1.0}, std::vector<double>{0.2}));
        CHECK(lat.branch_count() == 4);
        CHECK(lat.branch_probability(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
        CHECK(lat.branch_probability(0, 1) == doctest::Approx(0.4).epsilon(1e-15));
        CHECK(lat.branch_probability(0, 2) == doctest::Approx(0.1).epsilon(1e-15));
        CHECK(lat.branch_probability(0, 3) == doctest::Approx(0.1).epsilon(1e-15));
    }

    Lattice lat(TimeGrid(1.0, 4), MarkSpace({0.5, -1.0}, std::vector<double>{0.3, 0.2}));
    // slice k holds (k+1) C(k+m, m) nodes
    CHECK(lat.slice_size(0) == 1);
    CHECK(lat.slice_size(1) == 2 * 3);
    CHECK(lat.slice_size(4) == 5 * 15);

    for (int k = 0; k < lat.steps(); ++k) {
        double sum = 0.0;
        for (int br = 0; br < lat.branch_count(); ++br) {
            CHECK(lat.branch_probability(k, br) >= 0.0);
            sum += lat.branch_probability(k, br);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    }

    // intensity too large for the step size
    CHECK_THROWS_AS(
        Lattice(TimeGrid(1.0, 1), MarkSpace({1.0}, std::vector<double>{1.5})),
        std::invalid_argument);
}

TEST_CASE("one-step noise moments are exact") {
    Lattice lat(TimeGrid(1.0, 6), MarkSpace({0.5, -1.0}, std::vector<double>{0.3, 0.2}));
    const double dt = lat.grid().dt;
    for (int k = 0; k < lat.steps(); ++k) {
        double mean_db = 0.0, var_db = 0.0;
        std::vector<double> jump_mean(2, 0.0);
        std::vector<double> cross(2, 0.0);
        for (int br = 0; br < lat.branch_count(); ++br) {
            const double p = lat.branch_probability(k, br);
            const double db = lat.branch_brownian_sign(br) * lat.sqrt_dt();
            mean_db += p * db;
            var_db += p * db * db;
            const int j = lat.branch_mark(br);
            if (j >= 0) {
                jump_mean[static_cast<std::size_t>(j)] += p;
                cross[static_cast<std::size_t>(j)] += p * db;
            }
        }
        CHECK(std::fabs(mean_db) <= 1e-16);
        CHECK(var_db == doctest::Approx(dt).epsilon(1e-14));
        for (int j = 0; j < 2; ++j) {
            // compensated jump increment has mean zero: E[1_j] = w_j dt
            CHECK(jump_mean[static_cast<std::size_t>(j)] ==
                  doctest::Approx(lat.weight(j, k) * dt).epsilon(1e-13));
            CHECK(std::fabs(cross[static_cast<std::size_t>(j)]) <= 1e-16);
        }
    }
}

TEST_CASE("state enumeration, ranking and children") {
    Lattice lat(TimeGrid(1.0, 5), MarkSpace({0.5, -1.0, 2.0}, std::vector<double>{0.1, 0.1, 0.1}));
    const int k = 4;

    // state/index_of roundtrip over the whole slice
    for (std::size_t node = 0; node < lat.slice_size(k); ++node) {
        LatticeState s = lat.state(k, node);
        CHECK(lat.index_of(k, s) == node);
        CHECK((s.brownian + k) % 2 == 0);
        CHECK(std::abs(s.brownian) <= k);
        int total = 0;
        for (int c : s.counts) {
            CHECK(c >= 0);
            total += c;
        }
        CHECK(total <= k);
        CHECK(lat.brownian_value(k, node) ==
              doctest::Approx(s.brownian * lat.sqrt_dt()).epsilon(1e-15));
    }

    // for_each_state visits every node exactly once, in index order
    std::size_t expect = 0;
    lat.for_each_state(k, [&](std::size_t node, int b, std::span<const int> counts) {
        CHECK(node == expect);
        LatticeState s = lat.state(k, node);
        CHECK(s.brownian == b);
        for (int j = 0; j < 3; ++j)
            CHECK(s.counts[static_cast<std::size_t>(j)] == counts[static_cast<std::size_t>(j)]);
        ++expect;
    });
    CHECK(expect == lat.slice_size(k));

    // children advance the state by the branch outcome
    for (std::size_t node = 0; node < lat.slice_size(k); ++node) {
        LatticeState s = lat.state(k, node);
        for (int br = 0; br < lat.branch_count(); ++br) {
            LatticeState t = s;
            t.brownian += lat.branch_brownian_sign(br);
            if (int j = lat.branch_mark(br); j >= 0) ++t.counts[static_cast<std::size_t>(j)];
            CHECK(lat.child_index(k, s, br) == lat.index_of(k + 1, t));
        }
    }

    // flattened child table agrees with rank arithmetic
    const auto table = lat.child_count_ranks(k);
    const std::size_t nc = lat.count_vectors(k);
    std::vector<int> counts(3, 0);
    std::size_t crank = 0;
    do {
        for (int f = 0; f <= 3; ++f) {
            std::vector<int> next(counts);
            if (f > 0) ++next[static_cast<std::size_t>(f - 1)];
            CHECK(table[crank * 4 + static_cast<std::size_t>(f)] ==
                  lat.rank_counts(next, k + 1));
        }
        ++crank;
    } while (Lattice::next_counts(counts, k));
    CHECK(crank == nc);
}

TEST_CASE("forward probabilities are a probability flow") {
    Lattice lat(TimeGrid(0.8, 6), MarkSpace({0.5, -1.0}, std::vector<double>{0.4, 0.3}));
    auto fwd = lat.forward_probabilities();
    REQUIRE(fwd.size() == static_cast<std::size_t>(lat.steps()) + 1);
    CHECK(fwd[0].size() == 1);
    CHECK(fwd[0][0] == 1.0);
    for (int k = 0; k <= lat.steps(); ++k) {
        double sum = 0.0;
        for (double p : fwd[static_cast<std::size_t>(k)]) {
            CHECK(p >= 0.0);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));
    }

    // push one step by hand and compare
    std::vector<double> manual(lat.slice_size(1), 0.0);
    LatticeState root = lat.state(0, 0);
    for (int br = 0; br < lat.branch_count(); ++br)
        manual[lat.child_index(0, root, br)] += lat.branch_probability(0, br);
    for (std::size_t i = 0; i < manual.size(); ++i)
        CHECK(fwd[1][i] == doctest::Approx(manual[i]).epsilon(1e-15));
}

TEST_CASE("time-varying weights enter the lattice per slice") {
    MarkSpace ms({1.0}, std::vector<PiecewiseConstant>{PiecewiseConstant({0.5}, {0.2, 0.4})});
    Lattice lat(TimeGrid(1.0, 4), ms);
    CHECK(lat.weight(0, 0) == 0.2);
    CHECK(lat.weight(0, 1) == 0.2);  // t = 0.25
    CHECK(lat.weight(0, 2) == 0.4);  // t = 0.5 switches
    CHECK(lat.weight(0, 3) == 0.4);
    CHECK(lat.branch_probability(3, 2) == doctest::Approx(0.4 * 0.25 / 2.0).epsilon(1e-15));
}

TEST_CASE("path simulation is reproducible and matches moments") {
    TimeGrid grid(1.0, 16);
    MarkSpace ms({0.5, -1.0}, std::vector<double>{0.6, 0.4});
    const std::size_t n = 20000;

    PathSet a = simulate_paths(grid, ms, n, 77);
    PathSet b = simulate_paths(grid, ms, n, 77);
    CHECK(a.db == b.db);
    CHECK(a.jump == b.jump);

    PathSet c = simulate_paths(grid, ms, n, 78);
    CHECK(a.db != c.db);

    // Brownian increment moments at a fixed step, within 4 standard errors
    const double dt = grid.dt;
    double mean = 0.0, var = 0.0;
    std::vector<double> freq(2, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        const double d = a.increment(p, 3);
        mean += d;
        var += d * d;
        const int j = a.jump_mark(p, 3);
        if (j >= 0) freq[static_cast<std::size_t>(j)] += 1.0;
    }
    mean /= static_cast<double>(n);
    var = var / static_cast<double>(n) - mean * mean;
    CHECK(std::fabs(mean) <= 4.0 * std::sqrt(dt / static_cast<double>(n)));
    CHECK(std::fabs(var - dt) <= 4.0 * dt * std::sqrt(2.0 / static_cast<double>(n)));
    for (int j = 0; j < 2; ++j) {
        const double p_j = ms.weight(j, grid.time(3)) * dt;
        const double se = std::sqrt(p_j * (1.0 - p_j) / static_cast<double>(n));
        CHECK(std::fabs(freq[static_cast<std::size_t>(j)] / static_cast<double>(n) - p_j) <=
              4.0 * se);
    }

    // thinning needs lambda dt < 1
    CHECK_THROWS_AS(simulate_paths(TimeGrid(1.0, 1), MarkSpace({1.0}, std::vector<double>{1.2}),
                                   10, 1),
                    std::invalid_argument);
}
