#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "genad/numerics/tape.hpp"

namespace genad::numerics {

/// A differentiable computation: named parameters plus a function that records a
/// scalar loss on a fresh tape from those parameters.
struct DiffGraph {
  ParameterSet parameters;
  std::function<Var(Tape&, const BoundParameters&)> loss;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// Check every element when the graph has at most this many; otherwise sample a
  /// seeded subset of at least this size, touching every parameter tensor.
  std::size_t max_elements = 400;
  std::uint64_t seed = 0;
  /// Relative error is |a - n| / max(|a|, |n|, floor).
  double denominator_floor = 1e-6;
  /// Test hook: multiplies every analytic gradient by (1 + corrupt_gradient).
  double corrupt_gradient = 0.0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients with central finite differences.
/// Throws ContractError if the loss is not scalar or epsilon is outside [1e-7, 1e-3].
GradCheckResult grad_check(const DiffGraph& graph, const GradCheckOptions& options = {});

}  // namespace genad::numerics
