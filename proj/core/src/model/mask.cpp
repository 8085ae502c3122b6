#include "genad/model/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "genad/errors.hpp"

namespace genad::model {

bool MaskPlan::contains(std::size_t metric) const {
  return std::binary_search(masked.begin(), masked.end(), metric);
}

std::size_t masked_count(std::size_t n_metrics, double mask_ratio) {
  if (n_metrics < 2) throw ContractError("mask plan: need at least 2 metrics");
  const auto k = static_cast<long long>(std::llround(mask_ratio * static_cast<double>(n_metrics)));
  return static_cast<std::size_t>(std::clamp<long long>(k, 1, static_cast<long long>(n_metrics) - 1));
}

MaskPlan build_mask_plan(std::size_t n_metrics, double mask_ratio, std::mt19937_64& rng) {
  const std::size_t k = masked_count(n_metrics, mask_ratio);
  std::vector<std::size_t> all(n_metrics);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n_metrics - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return MaskPlan{std::move(all)};
}

std::vector<MaskPlan> inference_plans(std::size_t n_metrics, std::size_t k) {
  if (k == 0) throw ContractError("inference_plans: k must be positive");
  const std::size_t groups = (n_metrics + k - 1) / k;
  std::vector<MaskPlan> plans(groups);
  for (std::size_t i = 0; i < n_metrics; ++i) plans[i / k].masked.push_back(i);
  return plans;
}

}  // namespace genad::model
