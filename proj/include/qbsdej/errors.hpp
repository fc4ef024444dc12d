#pragma once

#include <stdexcept>
#include <string>

namespace qbsdej {

/// Thrown when an iteration fails to converge, a quantity leaves its valid
/// range mid-computation, or a regression collapses. Precondition misuse
/// keeps throwing std::invalid_argument; this type is reserved for failures
/// that can only be detected while the numbers are in flight.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace qbsdej
