#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "qbsdej/generator.hpp"
#include "qbsdej/lattice.hpp"
#include "qbsdej/solver.hpp"

namespace qbsdej::cli {

// Compiles an arithmetic expression over the named variables into a callable.
// Supported syntax: numbers, + - * /, unary minus, parentheses, and the
// functions exp log expm1 log1p abs sqrt tanh min max pow.  The returned
// callable is pure and safe to invoke from several threads at once.
using CompiledExpr = std::function<double(const std::vector<double>&)>;
CompiledExpr compile_expression(const std::string& expr,
                                const std::vector<std::string>& variables);

// Everything a task needs, assembled from the [model], [generator],
// [generator2] and [payoff] sections.
struct Experiment {
    TimeGrid grid;
    MarkSpace marks;
    std::uint64_t seed = 0;
    std::unique_ptr<Lattice> lattice;
    GeneratorSpec generator;
    std::optional<GeneratorSpec> generator2;
    TerminalCondition payoff;
};

Experiment build_experiment(const Config& cfg);
GeneratorSpec build_generator(const Config& cfg, const std::string& section,
                              const MarkSpace& marks);
TerminalCondition build_payoff(const Config& cfg, const MarkSpace& marks);

}  // namespace qbsdej::cli
