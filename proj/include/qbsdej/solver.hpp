#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "qbsdej/generator.hpp"
#include "qbsdej/lattice.hpp"
#include "qbsdej/paths.hpp"

namespace qbsdej {

/// Terminal payoff as a function of the terminal state: the Brownian value
/// and the per-mark jump counts. The same signature serves the lattice
/// (exact states) and the Monte Carlo backend (simulated states). The sup
/// norm must be declared; the solvers assert it, since the theory only
/// covers bounded terminal conditions.
struct TerminalCondition {
    std::function<double(double brownian, std::span<const int> counts)> payoff;
    double bound = 0.0;
};

struct SolverOptions {
    double fixed_point_tol = 1e-12;
    int max_fixed_point_iters = 10000;
};

/// Backward-induction solution on the lattice. Slice vectors are indexed by
/// node; y runs over slices start_slice..terminal_slice, z and u over
/// start_slice..terminal_slice-1 (controls act on the step they open).
/// u is laid out [node * mark_count + j]. The struct views the lattice it
/// was solved on; keep that lattice alive while the solution is in use.
struct LatticeSolution {
    const Lattice* model = nullptr;
    int start_slice = 0;
    int terminal_slice = 0;
    std::vector<std::vector<double>> y;
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> u;
    double y_sup = 0.0;

    double y0() const { return y[0][0]; }
};

/// Evaluate a terminal condition on every node of the given slice and
/// assert the declared bound.
std::vector<double> terminal_values(const Lattice& lattice,
                                    const TerminalCondition& xi, int slice);

/// Implicit-in-y, explicit-in-(z,u) one-step scheme with exact conditional
/// expectations:
///   Y_k = E_k[Y_{k+1}] + g(t_k, Y_k, Z_k, U_k) dt,
///   Z_k = E_k[Y_{k+1} dB_k] / dt,
///   U_k(x_j) = (Brownian-averaged jump-j child value)
///            - (Brownian-averaged no-jump child value).
/// When g depends on y the per-node fixed point requires the contraction
/// condition lipschitz_y * dt < 1.
LatticeSolution solve_lattice(const Lattice& lattice, const GeneratorSpec& g,
                              const TerminalCondition& xi,
                              const SolverOptions& opts = {});

/// Same scheme from explicit terminal values sitting at terminal_slice,
/// swept back to stop_slice. Lets callers restart the induction mid-lattice
/// (time consistency, one-step operators, decompositions).
LatticeSolution solve_lattice_values(const Lattice& lattice,
                                     const GeneratorSpec& g,
                                     std::vector<double> values,
                                     int terminal_slice, int stop_slice = 0,
                                     const SolverOptions& opts = {});

namespace ref {
/// Serial reference implementation of the same scheme, kept independent of
/// the parallel sweep so the two can be compared bitwise in tests.
LatticeSolution solve_lattice(const Lattice& lattice, const GeneratorSpec& g,
                              const TerminalCondition& xi,
                              const SolverOptions& opts = {});
LatticeSolution solve_lattice_values(const Lattice& lattice,
                                     const GeneratorSpec& g,
                                     std::vector<double> values,
                                     int terminal_slice, int stop_slice = 0,
                                     const SolverOptions& opts = {});
} // namespace ref

/// Discrete stand-ins for the BMO norms: sup over nodes of the conditional
/// remaining quadratic variation of the Z- and U-parts, plus the tail sums
/// seen from the root (nonincreasing in the slice index by construction).
struct DiagnosticsReport {
    double y_sup = 0.0;
    double z_bmo = 0.0;
    double u_bmo = 0.0;
    std::vector<double> root_z_tail;
    std::vector<double> root_u_tail;
};

DiagnosticsReport bmo_diagnostics(const LatticeSolution& sol);

/// Regression basis for the Monte Carlo backend: polynomials in the running
/// Brownian value up to the given degree, the running jump counts as linear
/// regressors, and centered one-step jump indicators whose coefficients
/// estimate U. Columns that are constant across paths at a slice are
/// dropped (the intercept absorbs them).
struct BasisSpec {
    int degree = 2;
    bool include_counts = true;

    int size(int mark_count) const {
        return degree + 1 + (include_counts ? mark_count : 0);
    }
};

struct PathSolution {
    std::size_t paths = 0;
    int steps = 0;
    int mark_count = 0;
    std::vector<double> y; // [path * (steps+1) + k]
    std::vector<double> z; // [path * steps + k]
    std::vector<double> u; // [(path * steps + k) * mark_count + j]
    double y0 = 0.0;       // in-sample regression value at time 0
    double y0_out = 0.0;   // out-of-sample resimulated estimate
    double y0_out_se = 0.0;
    double max_regression_residual = 0.0;

    double value(std::size_t p, int k) const {
        return y[p * static_cast<std::size_t>(steps + 1) +
                 static_cast<std::size_t>(k)];
    }
};

/// Least-squares Monte Carlo backward induction: per slice, regress the
/// one-step-ahead value on the basis plus centered jump indicators (their
/// coefficients estimate U), regress the dB-weighted value on the basis for
/// Z, then apply the same implicit-in-y step as the lattice scheme per
/// path. The out-of-sample estimate resimulates with a derived seed and
/// averages xi + sum_k g dt.
PathSolution solve_lsmc(const PathSet& paths, const GeneratorSpec& g,
                        const TerminalCondition& xi, const BasisSpec& basis,
                        const SolverOptions& opts = {});

} // namespace qbsdej
