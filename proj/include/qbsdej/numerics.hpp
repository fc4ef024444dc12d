#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "qbsdej/errors.hpp"

namespace qbsdej {

/// splitmix64 finalizer; the building block of every RNG stream in the
/// library. Stateless, so draws can be indexed by (seed, path, step, slot)
/// and results do not depend on thread count or evaluation order.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t counter_mix(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b, std::uint64_t c) {
    std::uint64_t x = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
    x = splitmix64(x ^ (a * 0x14057b7ef767814fULL));
    x = splitmix64(x ^ (b * 0x27bb2ee687b0b0fdULL));
    x = splitmix64(x ^ (c + 0x2545f4914f6cdd1dULL));
    return x;
}

/// Uniform draw in the open interval (0, 1).
inline double uniform_from_bits(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller from two counter draws.
inline double normal_from_bits(std::uint64_t bits1, std::uint64_t bits2) {
    const double u1 = uniform_from_bits(bits1);
    const double u2 = uniform_from_bits(bits2);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Tiny sequential RNG for test payoff generation and audits; not used in
/// path simulation (which is counter-indexed).
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next_bits() { return state_ = splitmix64(state_); }
    double uniform() { return uniform_from_bits(next_bits()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() {
        const std::uint64_t a = next_bits();
        const std::uint64_t b = next_bits();
        return normal_from_bits(a, b);
    }

  private:
    std::uint64_t state_;
};

/// Solve the symmetric positive definite system G x = rhs in place via
/// Cholesky. Throws NumericalError naming the offending pivot when G is
/// numerically rank-deficient (relative pivot below 1e-12).
inline std::vector<double> solve_spd(std::vector<double> g, std::vector<double> rhs,
                                     std::size_t n, const char* context) {
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(g[i * n + i]));
    if (scale == 0.0) scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = g[i * n + j];
            for (std::size_t p = 0; p < j; ++p) s -= g[i * n + p] * g[j * n + p];
            if (i == j) {
                if (s <= 1e-12 * scale)
                    throw NumericalError(std::string(context) +
                                         ": normal matrix is rank-deficient");
                g[i * n + i] = std::sqrt(s);
            } else {
                g[i * n + j] = s / g[j * n + j];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = rhs[i];
        for (std::size_t p = 0; p < i; ++p) s -= g[i * n + p] * rhs[p];
        rhs[i] = s / g[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = rhs[ii];
        for (std::size_t p = ii + 1; p < n; ++p) s -= g[p * n + ii] * rhs[p];
        rhs[ii] = s / g[ii * n + ii];
    }
    return rhs;
}

/// FNV-1a over raw bytes; used for config hashes and solve-cache keys.
inline std::uint64_t fnv1a(const void* data, std::size_t size,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace qbsdej
