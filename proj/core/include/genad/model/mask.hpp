#pragma once

#include <cstddef>
#include <random>
#include <vector>

namespace genad::model {

/// Metrics whose target segment is replaced by the mask series; sorted, distinct.
struct MaskPlan {
  std::vector<std::size_t> masked;

  bool contains(std::size_t metric) const;
  friend bool operator==(const MaskPlan&, const MaskPlan&) = default;
};

/// k = clamp(round(mask_ratio * n_metrics), 1, n_metrics - 1).
std::size_t masked_count(std::size_t n_metrics, double mask_ratio);

/// Draws k distinct metrics uniformly. Throws ContractError when n_metrics < 2.
MaskPlan build_mask_plan(std::size_t n_metrics, double mask_ratio, std::mt19937_64& rng);

/// ceil(n / k) disjoint groups filled in turn with k metrics each (the last one
/// takes the remainder), so each metric is masked in exactly one pass.
std::vector<MaskPlan> inference_plans(std::size_t n_metrics, std::size_t k);

}  // namespace genad::model
