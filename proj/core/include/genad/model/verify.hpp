#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genad/model/config.hpp"
#include "genad/numerics/gradcheck.hpp"

namespace genad::model {

struct GradCheckEntry {
  std::string name;
  numerics::GradCheckResult result;
};

/// Finite-difference checks of every differentiable primitive and of the full
/// masked-reconstruction loss of a model with `model_config` (dropout off).
/// Inputs are drawn from `seed`.
std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed, const ModelConfig& model_config,
                                                const numerics::GradCheckOptions& options);

}  // namespace genad::model
