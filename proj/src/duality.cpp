#include "qbsdej/duality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slice_topo.hpp"

namespace qbsdej {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_shapes(const Lattice& lat, const MeasureChange& mc) {
    const std::size_t n = static_cast<std::size_t>(lat.steps());
    const std::size_t m = static_cast<std::size_t>(lat.mark_count());
    if (mc.mu.size() != n || mc.v.size() != n)
        throw std::invalid_argument(
            "MeasureChange: need one mu/v slice per time step");
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t sz = lat.slice_size(static_cast<int>(k));
        if (mc.mu[k].size() != sz || mc.v[k].size() != sz * m)
            throw std::invalid_argument(
                "MeasureChange: slice " + std::to_string(k) +
                " does not match the lattice layout");
    }
}

[[noreturn]] void reject(int k, std::size_t node, const std::string& why) {
    throw std::invalid_argument("girsanov_shift: inadmissible density at slice " +
                                std::to_string(k) + ", node " +
                                std::to_string(node) + ": " + why);
}

} // namespace

MeasureChange constant_measure_change(const Lattice& lat, double mu,
                                      std::span<const double> v) {
    const int m = lat.mark_count();
    if (static_cast<int>(v.size()) != m)
        throw std::invalid_argument(
            "constant_measure_change: v size != mark count");
    MeasureChange mc;
    const std::size_t n = static_cast<std::size_t>(lat.steps());
    mc.mu.resize(n);
    mc.v.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t sz = lat.slice_size(static_cast<int>(k));
        mc.mu[k].assign(sz, mu);
        mc.v[k].resize(sz * static_cast<std::size_t>(m));
        for (std::size_t node = 0; node < sz; ++node)
            for (int j = 0; j < m; ++j)
                mc.v[k][node * static_cast<std::size_t>(m) +
                        static_cast<std::size_t>(j)] =
                    v[static_cast<std::size_t>(j)];
    }
    return mc;
}

ShiftedLattice::ShiftedLattice(const Lattice& lat, MeasureChange mc)
    : lat_(&lat), mc_(std::move(mc)) {
    check_shapes(lat, mc_);
    const int m = lat.mark_count();
    const double dt = lat.grid().dt;
    const double sd = lat.sqrt_dt();
    for (int k = 0; k < lat.steps(); ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        const std::size_t sz = lat.slice_size(k);
        for (std::size_t node = 0; node < sz; ++node) {
            const double mu = mc_.mu[ks][node];
            if (!(std::abs(mu) * sd < 1.0))
                reject(k, node, "|mu| sqrt(dt) must be < 1");
            double lam = 0.0;
            for (int j = 0; j < m; ++j) {
                const double vj =
                    mc_.v[ks][node * static_cast<std::size_t>(m) +
                              static_cast<std::size_t>(j)];
                if (!(vj > -1.0)) reject(k, node, "jump tilt v_j must be > -1");
                lam += lat.weight(j, k) * (1.0 + vj);
            }
            if (!(lam * dt < 1.0))
                reject(k, node, "tilted intensity needs lambda' dt < 1");
        }
    }
}

double ShiftedLattice::probability(int k, std::size_t node, int branch) const {
    const Lattice& lat = *lat_;
    const int m = lat.mark_count();
    const std::size_t ks = static_cast<std::size_t>(k);
    const double dt = lat.grid().dt;
    const double mu = mc_.mu[ks][node];
    const double half = 0.5 * (1.0 + lat.branch_brownian_sign(branch) * mu *
                                         lat.sqrt_dt());
    const int j = lat.branch_mark(branch);
    if (j < 0) {
        double lam = 0.0;
        for (int jj = 0; jj < m; ++jj)
            lam += lat.weight(jj, k) *
                   (1.0 + mc_.v[ks][node * static_cast<std::size_t>(m) +
                                    static_cast<std::size_t>(jj)]);
        return (1.0 - lam * dt) * half;
    }
    const double vj = mc_.v[ks][node * static_cast<std::size_t>(m) +
                                static_cast<std::size_t>(j)];
    return lat.weight(j, k) * (1.0 + vj) * dt * half;
}

double ShiftedLattice::tilt(int k, std::size_t node, int branch) const {
    const double p = lat_->branch_probability(k, branch);
    // Branches the reference measure never takes (w_j = 0) carry no mass
    // under the tilt either; report 0 rather than 0/0.
    if (p == 0.0) return 0.0;
    return probability(k, node, branch) / p;
}

std::vector<std::vector<double>> ShiftedLattice::forward_probabilities() const {
    const Lattice& lat = *lat_;
    const int n = lat.steps();
    std::vector<std::vector<double>> out(static_cast<std::size_t>(n) + 1);
    out[0] = {1.0};
    for (int k = 0; k < n; ++k) {
        const detail::SliceTopo topo = detail::slice_topo(lat, k);
        const std::size_t sz = lat.slice_size(k);
        out[static_cast<std::size_t>(k) + 1].assign(lat.slice_size(k + 1), 0.0);
        for (std::size_t node = 0; node < sz; ++node) {
            const double p = out[static_cast<std::size_t>(k)][node];
            if (p == 0.0) continue;
            for (int br = 0; br < lat.branch_count(); ++br) {
                const double q = probability(k, node, br);
                if (q == 0.0) continue;
                out[static_cast<std::size_t>(k) + 1][topo.child(node, br)] +=
                    p * q;
            }
        }
    }
    return out;
}

std::vector<std::vector<double>> ShiftedLattice::gamma() const {
    const auto q = forward_probabilities();
    const auto p = lat_->forward_probabilities();
    std::vector<std::vector<double>> out(q.size());
    for (std::size_t k = 0; k < q.size(); ++k) {
        out[k].assign(q[k].size(), 0.0);
        for (std::size_t node = 0; node < q[k].size(); ++node)
            if (p[k][node] > 0.0) out[k][node] = q[k][node] / p[k][node];
    }
    return out;
}

ShiftedLattice girsanov_shift(const Lattice& lat, const MeasureChange& mc) {
    return ShiftedLattice(lat, mc);
}

double dual_lower_bound(const GExpectation& ge, const TerminalCondition& xi,
                        const MeasureChange& mc) {
    const Lattice& lat = ge.lattice();
    const GeneratorSpec& g = ge.generator();
    const ShiftedLattice shifted(lat, mc);
    const int n = lat.steps();
    const int m = lat.mark_count();
    const double dt = lat.grid().dt;

    std::vector<double> value = terminal_values(lat, xi, n);
    for (int k = n - 1; k >= 0; --k) {
        const detail::SliceTopo topo = detail::slice_topo(lat, k);
        const std::size_t sz = lat.slice_size(k);
        const double tk = lat.grid().time(k);
        std::vector<double> cur(sz, 0.0);
        for (std::size_t node = 0; node < sz; ++node) {
            double e = 0.0;
            for (int br = 0; br < lat.branch_count(); ++br) {
                const double q = shifted.probability(k, node, br);
                if (q == 0.0) continue; // keep 0 * (-inf) out of the sum
                e += q * value[topo.child(node, br)];
            }
            const std::size_t ks = static_cast<std::size_t>(k);
            const double penal = legendre_transform(
                g, tk, mc.mu[ks][node],
                std::span<const double>(
                    mc.v[ks].data() + node * static_cast<std::size_t>(m),
                    static_cast<std::size_t>(m)));
            cur[node] = (penal == kInf) ? -kInf : e - penal * dt;
        }
        value.swap(cur);
    }
    return value[0];
}

MeasureChange optimal_density(const Lattice& lat, const GeneratorSpec& g,
                              const LatticeSolution& sol) {
    if (sol.model != &lat)
        throw std::invalid_argument(
            "optimal_density: solution was built on a different lattice");
    if (sol.start_slice != 0)
        throw std::invalid_argument(
            "optimal_density: need a solution swept back to slice 0");
    const int m = lat.mark_count();
    const double sd = lat.sqrt_dt();
    const double dt = lat.grid().dt;
    const int terminal = sol.terminal_slice;

    MeasureChange mc;
    mc.mu.resize(static_cast<std::size_t>(terminal));
    mc.v.resize(static_cast<std::size_t>(terminal));
    std::vector<double> up(static_cast<std::size_t>(m));
    std::vector<double> dn(static_cast<std::size_t>(m));

    for (int k = 0; k < terminal; ++k) {
        const std::size_t ks = static_cast<std::size_t>(k);
        const double tk = lat.grid().time(k);
        const std::size_t sz = lat.slice_size(k);
        mc.mu[ks].assign(sz, 0.0);
        mc.v[ks].assign(sz * static_cast<std::size_t>(m), 0.0);
        for (std::size_t node = 0; node < sz; ++node) {
            const double z = sol.z[ks][node];
            const std::span<const double> u(
                sol.u[ks].data() + node * static_cast<std::size_t>(m),
                static_cast<std::size_t>(m));
            std::span<double> v(mc.v[ks].data() +
                                    node * static_cast<std::size_t>(m),
                                static_cast<std::size_t>(m));
            double mu;
            if (g.subgradient) {
                mu = g.subgradient(tk, z, u, v);
            } else {
                const double h = 1e-5;
                const double y = sol.y[ks][node];
                mu = (g.evaluate(tk, y, z + h, u) - g.evaluate(tk, y, z - h, u)) /
                     (2.0 * h);
                std::copy(u.begin(), u.end(), up.begin());
                std::copy(u.begin(), u.end(), dn.begin());
                for (int j = 0; j < m; ++j) {
                    const std::size_t js = static_cast<std::size_t>(j);
                    const double w = lat.weight(j, k);
                    if (w == 0.0) {
                        v[js] = 0.0;
                        continue;
                    }
                    up[js] = u[js] + h;
                    dn[js] = u[js] - h;
                    v[js] = (g.evaluate(tk, y, z, up) -
                             g.evaluate(tk, y, z, dn)) /
                            (2.0 * h * w);
                    up[js] = u[js];
                    dn[js] = u[js];
                }
            }
            mc.mu[ks][node] = mu;

            if (!(std::abs(mu) * sd < 1.0))
                throw std::invalid_argument(
                    "optimal_density: |mu| sqrt(dt) >= 1 at slice " +
                    std::to_string(k) + ", node " + std::to_string(node) +
                    "; refine the grid");
            double lam = 0.0;
            for (int j = 0; j < m; ++j) {
                const double vj = v[static_cast<std::size_t>(j)];
                if (!(vj > -1.0))
                    throw std::invalid_argument(
                        "optimal_density: jump tilt v_j <= -1 at slice " +
                        std::to_string(k) + ", node " + std::to_string(node));
                lam += lat.weight(j, k) * (1.0 + vj);
            }
            if (!(lam * dt < 1.0))
                throw std::invalid_argument(
                    "optimal_density: tilted intensity too large at slice " +
                    std::to_string(k) + ", node " + std::to_string(node) +
                    "; refine the grid");
        }
    }
    return mc;
}

} // namespace qbsdej
