#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace qbsdej {

/// Right-continuous step function of time, used for the per-mark compensator
/// masses. A constant weight is the common case (no breakpoints).
struct PiecewiseConstant {
    std::vector<double> breakpoints; // strictly increasing interior times
    std::vector<double> values;      // size breakpoints.size() + 1

    PiecewiseConstant() : values{0.0} {}

    explicit PiecewiseConstant(double constant) : values{constant} {}

    PiecewiseConstant(std::vector<double> breaks, std::vector<double> vals)
        : breakpoints(std::move(breaks)), values(std::move(vals)) {
        if (values.size() != breakpoints.size() + 1)
            throw std::invalid_argument(
                "PiecewiseConstant: need one more value than breakpoints");
        for (std::size_t i = 1; i < breakpoints.size(); ++i)
            if (!(breakpoints[i - 1] < breakpoints[i]))
                throw std::invalid_argument(
                    "PiecewiseConstant: breakpoints must be increasing");
    }

    double at(double t) const {
        std::size_t i = 0;
        while (i < breakpoints.size() && t >= breakpoints[i]) ++i;
        return values[i];
    }
};

/// Finite mark space for the jump part of the filtration.
///
/// The random measure charges m fixed points x_1..x_m; mark j arrives with
/// per-unit-time intensity w_j(t) >= 0, so the compensator is
/// nu_t(dx) dt = sum_j w_j(t) delta_{x_j}(dx) dt and the total intensity is
/// lambda(t) = sum_j w_j(t). m = 0 (Brownian filtration only) is allowed.
class MarkSpace {
  public:
    MarkSpace() = default;

    /// Constant weights.
    MarkSpace(std::vector<double> marks, const std::vector<double>& weights) {
        std::vector<PiecewiseConstant> w;
        w.reserve(weights.size());
        for (double x : weights) w.emplace_back(x);
        init(std::move(marks), std::move(w));
    }

    MarkSpace(std::vector<double> marks, std::vector<PiecewiseConstant> weights) {
        init(std::move(marks), std::move(weights));
    }

    int size() const { return static_cast<int>(marks_.size()); }

    double mark(int j) const { return marks_[static_cast<std::size_t>(j)]; }

    double weight(int j, double t) const {
        return weights_[static_cast<std::size_t>(j)].at(t);
    }

    /// Total jump intensity lambda(t) = sum_j w_j(t).
    double intensity(double t) const {
        double s = 0.0;
        for (int j = 0; j < size(); ++j) s += weight(j, t);
        return s;
    }

    /// Largest value weight j takes over all time; handy for time-uniform
    /// growth certificates.
    double max_weight(int j) const {
        double mx = 0.0;
        for (double v : weights_[static_cast<std::size_t>(j)].values)
            mx = std::max(mx, v);
        return mx;
    }

    /// L2(nu_t) inner product <v, u>_t = sum_j w_j(t) v_j u_j.
    double inner(double t, std::span<const double> v,
                 std::span<const double> u) const {
        double s = 0.0;
        for (int j = 0; j < size(); ++j)
            s += weight(j, t) * v[static_cast<std::size_t>(j)] *
                 u[static_cast<std::size_t>(j)];
        return s;
    }

  private:
    void init(std::vector<double> marks, std::vector<PiecewiseConstant> weights) {
        if (marks.size() != weights.size())
            throw std::invalid_argument("MarkSpace: marks/weights size mismatch");
        for (const auto& w : weights)
            for (double v : w.values)
                if (!(v >= 0.0))
                    throw std::invalid_argument(
                        "MarkSpace: weights must be nonnegative");
        for (double x : marks)
            if (x == 0.0)
                throw std::invalid_argument("MarkSpace: marks must be nonzero");
        marks_ = std::move(marks);
        weights_ = std::move(weights);
    }

    std::vector<double> marks_;
    std::vector<PiecewiseConstant> weights_;
};

/// j_t(u) = sum_j w_j(t) (exp(u_j) - 1 - u_j), the exponential compensator
/// functional that calibrates quadratic-exponential growth in the jump
/// argument. Nonnegative, convex, j_t(0) = 0.
inline double j_functional(double t, std::span<const double> u,
                           const MarkSpace& marks) {
    if (static_cast<int>(u.size()) != marks.size())
        throw std::invalid_argument("j_functional: u size != mark count");
    double s = 0.0;
    for (int j = 0; j < marks.size(); ++j) {
        const double uj = u[static_cast<std::size_t>(j)];
        s += marks.weight(j, t) * (std::expm1(uj) - uj);
    }
    return s;
}

} // namespace qbsdej
