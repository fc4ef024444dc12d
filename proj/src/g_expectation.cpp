#include "qbsdej/g_expectation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qbsdej/numerics.hpp"

namespace qbsdej {

GExpectation::GExpectation(Lattice lattice, GeneratorSpec g)
    : lattice_(std::make_unique<const Lattice>(std::move(lattice))),
      g_(std::move(g)) {
    if (static_cast<int>(g_.marks.size()) != lattice_->mark_count())
        throw std::invalid_argument(
            "GExpectation: generator and lattice mark counts differ");
}

const LatticeSolution& GExpectation::solve(const TerminalCondition& xi) const {
    return solve_values(terminal_values(*lattice_, xi, lattice_->steps()),
                        lattice_->steps(), 0);
}

const LatticeSolution& GExpectation::solve_values(std::vector<double> values,
                                                  int terminal_slice,
                                                  int stop_slice) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(std::make_pair(terminal_slice, stop_slice),
                              std::move(values));
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        auto sol = std::make_unique<LatticeSolution>(solve_lattice_values(
            *lattice_, g_, key.second, terminal_slice, stop_slice));
        it = cache_.emplace(std::move(key), std::move(sol)).first;
    }
    return *it->second;
}

std::vector<double> GExpectation::evaluate(const TerminalCondition& xi,
                                           int k) const {
    const LatticeSolution& sol = solve(xi);
    if (k < 0 || k > sol.terminal_slice)
        throw std::invalid_argument("GExpectation::evaluate: slice out of range");
    return sol.y[static_cast<std::size_t>(k)];
}

double GExpectation::value0(const TerminalCondition& xi) const {
    return solve(xi).y0();
}

namespace {

// Bounded random terminal payoff: tanh of an affine function of the
// terminal Brownian value and jump counts.
struct RandomPayoff {
    double a = 0.0, e = 0.0;
    std::vector<double> d;

    double operator()(double b, std::span<const int> c) const {
        double s = a * b + e;
        for (std::size_t j = 0; j < d.size(); ++j)
            s += d[j] * static_cast<double>(c[j]);
        return std::tanh(s);
    }
};

RandomPayoff random_payoff(SeededRng& rng, int m) {
    RandomPayoff p;
    p.a = rng.uniform(-2.0, 2.0);
    p.e = rng.uniform(-1.0, 1.0);
    p.d.resize(static_cast<std::size_t>(m));
    for (double& dj : p.d) dj = rng.uniform(-1.0, 1.0);
    return p;
}

// Worst deviation of convert(a_value, b_value) from zero over every node of
// every slice; checking all slices dominates any stopping-time evaluation,
// since a stopping time only selects a subset of (slice, node) pairs.
template <class Fn>
double scan(const LatticeSolution& a, const LatticeSolution& b, Fn&& defect) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.y.size(); ++k)
        for (std::size_t node = 0; node < a.y[k].size(); ++node)
            worst = std::max(worst, defect(a.y[k][node], b.y[k][node]));
    return worst;
}

} // namespace

AxiomReport check_axioms(const GExpectation& ge, int trials,
                         std::uint64_t seed) {
    if (trials < 1)
        throw std::invalid_argument("check_axioms: trials must be >= 1");
    const int m = ge.lattice().mark_count();
    const GeneratorSpec& g = ge.generator();
    SeededRng rng(seed);

    AxiomReport rep;
    rep.monotonicity.applicable = true;
    rep.cash_additivity.applicable = !g.depends_on_y;
    rep.convexity.applicable = g.convex_in_zu && !g.depends_on_y;
    rep.positive_homogeneity.applicable =
        g.positively_homogeneous && !g.depends_on_y;

    for (int trial = 0; trial < trials; ++trial) {
        const RandomPayoff p1 = random_payoff(rng, m);
        const RandomPayoff p2 = random_payoff(rng, m);
        const TerminalCondition xi1{p1, 1.0};
        const TerminalCondition xi2{p2, 1.0};
        const LatticeSolution& s1 = ge.solve(xi1);
        const LatticeSolution& s2 = ge.solve(xi2);

        {
            const TerminalCondition lo{
                [&](double b, std::span<const int> c) {
                    return std::min(p1(b, c), p2(b, c));
                },
                1.0};
            const TerminalCondition hi{
                [&](double b, std::span<const int> c) {
                    return std::max(p1(b, c), p2(b, c));
                },
                1.0};
            const double v = scan(ge.solve(lo), ge.solve(hi),
                                  [](double a, double b) { return a - b; });
            rep.monotonicity.max_violation =
                std::max(rep.monotonicity.max_violation, v);
            ++rep.monotonicity.trials;
        }

        if (rep.cash_additivity.applicable) {
            const double c = rng.uniform(-1.0, 1.0);
            const TerminalCondition shifted{
                [&](double b, std::span<const int> cc) { return p1(b, cc) + c; },
                2.5};
            const double v =
                scan(ge.solve(shifted), s1, [c](double a, double b) {
                    return std::abs(a - (b + c));
                });
            rep.cash_additivity.max_violation =
                std::max(rep.cash_additivity.max_violation, v);
            ++rep.cash_additivity.trials;
        }

        if (rep.convexity.applicable) {
            const double lam = rng.uniform(0.05, 0.95);
            const TerminalCondition mix{
                [&](double b, std::span<const int> c) {
                    return lam * p1(b, c) + (1.0 - lam) * p2(b, c);
                },
                1.0};
            const LatticeSolution& sm = ge.solve(mix);
            double worst = 0.0;
            for (std::size_t k = 0; k < sm.y.size(); ++k)
                for (std::size_t node = 0; node < sm.y[k].size(); ++node)
                    worst = std::max(worst,
                                     sm.y[k][node] - lam * s1.y[k][node] -
                                         (1.0 - lam) * s2.y[k][node]);
            rep.convexity.max_violation =
                std::max(rep.convexity.max_violation, worst);
            ++rep.convexity.trials;
        }

        if (rep.positive_homogeneity.applicable) {
            const double c = rng.uniform(0.1, 3.0);
            const TerminalCondition scaled{
                [&](double b, std::span<const int> cc) { return c * p1(b, cc); },
                3.0};
            const double v =
                scan(ge.solve(scaled), s1, [c](double a, double b) {
                    return std::abs(a - c * b);
                });
            rep.positive_homogeneity.max_violation =
                std::max(rep.positive_homogeneity.max_violation, v);
            ++rep.positive_homogeneity.trials;
        }
    }
    return rep;
}

double check_time_consistency(const GExpectation& ge,
                              const TerminalCondition& xi, int r, int s) {
    const int n = ge.lattice().steps();
    if (r < 0 || s < r || s > n)
        throw std::invalid_argument(
            "check_time_consistency: need 0 <= r <= s <= steps");
    const LatticeSolution& full = ge.solve(xi);
    const LatticeSolution& nested =
        ge.solve_values(full.y[static_cast<std::size_t>(s)], s, 0);
    double worst = 0.0;
    const auto& a = full.y[static_cast<std::size_t>(r)];
    const auto& b = nested.y[static_cast<std::size_t>(r)];
    for (std::size_t node = 0; node < a.size(); ++node)
        worst = std::max(worst, std::abs(a[node] - b[node]));
    return worst;
}

double recover_generator(const GExpectation& ge, double y0, double z0,
                         std::span<const double> u0, int k, int h) {
    const Lattice& lat = ge.lattice();
    const int m = lat.mark_count();
    if (static_cast<int>(u0.size()) != m)
        throw std::invalid_argument("recover_generator: u0 size != mark count");
    if (h < 1 || k < 0 || k + h > lat.steps())
        throw std::invalid_argument(
            "recover_generator: need h >= 1 and k + h <= steps");

    const double dt = lat.grid().dt;
    const int bidx0 = (k + 1) / 2;
    const int b0 = 2 * bidx0 - k;
    const std::size_t node0 =
        static_cast<std::size_t>(bidx0) * lat.count_vectors(k);

    // Deterministic compensator drift accumulated over the probe window.
    double comp = 0.0;
    for (int l = k; l < k + h; ++l)
        for (int j = 0; j < m; ++j)
            comp += lat.weight(j, l) * u0[static_cast<std::size_t>(j)] * dt;

    const double sd = lat.sqrt_dt();
    std::vector<double> values(lat.slice_size(k + h), 0.0);
    lat.for_each_state(k + h,
                       [&](std::size_t node, int b, std::span<const int> c) {
                           double v = y0 + z0 * sd * (b - b0) - comp;
                           for (int j = 0; j < m; ++j)
                               v += u0[static_cast<std::size_t>(j)] *
                                    static_cast<double>(c[static_cast<std::size_t>(j)]);
                           values[node] = v;
                       });

    const LatticeSolution& sol = ge.solve_values(std::move(values), k + h, k);
    return (sol.y[0][node0] - y0) / (static_cast<double>(h) * dt);
}

double entropic_closed_form(const Lattice& lattice, double theta,
                            const TerminalCondition& xi) {
    if (!(theta > 0.0))
        throw std::invalid_argument("entropic_closed_form: theta must be > 0");
    const std::vector<double> values =
        terminal_values(lattice, xi, lattice.steps());
    const std::vector<double> probs = lattice.forward_probabilities().back();
    double mx = -1e300;
    for (double v : values) mx = std::max(mx, v / theta);
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        s += probs[i] * std::exp(values[i] / theta - mx);
    return theta * (mx + std::log(s));
}

} // namespace qbsdej
