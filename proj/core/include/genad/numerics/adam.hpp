#pragma once

#include <cstdint>

#include "genad/numerics/tape.hpp"

namespace genad::numerics {

/// Bias-corrected Adam moments for one parameter set.
struct AdamState {
  std::uint64_t step = 0;
  ParameterSet m;
  ParameterSet v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Applies one Adam update to every parameter that has an entry in `grads`,
/// creating zero moments on first sight. Parameters without a gradient are left
/// untouched. Throws ShapeError when a gradient does not match its parameter.
void adam_step(AdamState& state, ParameterSet& params, const ParameterSet& grads);

}  // namespace genad::numerics
