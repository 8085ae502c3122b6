#pragma once

#include <cstddef>
#include <cstdint>

#include "json.hpp"

namespace genad::model {

struct ModelConfig {
  std::size_t n_metrics = 18;
  /// Segment length; a window spans 5 * t_e points.
  std::size_t t_e = 32;
  std::size_t d_model = 64;
  std::size_t n_heads = 8;
  std::size_t n_layers = 4;
  /// Hidden width of the feed-forward sub-block.
  std::size_t d_ff = 128;
  double mask_ratio = 0.20;
  /// Dropout after the attention and feed-forward sub-blocks during training.
  double dropout = 0.1;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Throws ContractError unless n_metrics >= 2, d_model % n_heads == 0,
/// 0 < mask_ratio < 1, n_layers >= 2, 0 <= dropout < 1 and all sizes are positive.
void validate(const ModelConfig& config);

nlohmann::json to_json(const ModelConfig& config);
/// Reads the fields present in `doc` over `base`; unknown keys are rejected.
ModelConfig model_config_from_json(const nlohmann::json& doc, ModelConfig base = {});

}  // namespace genad::model
