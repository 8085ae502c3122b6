#include "genad/data/normalize.hpp"

#include <algorithm>

#include "genad/errors.hpp"

namespace genad::data {
namespace {

void require_stats(const SeriesFrame& frame, const NormalizationStats& stats) {
  if (stats.min.size() != frame.n_metrics() || stats.max.size() != frame.n_metrics()) {
    throw ShapeError("normalization stats cover " + std::to_string(stats.min.size()) +
                     " metrics, frame has " + std::to_string(frame.n_metrics()));
  }
}

}  // namespace

NormalizationStats fit_stats(const SeriesFrame& frame, PointRange fit_range) {
  if (fit_range.begin >= fit_range.end) throw ContractError("fit_normalize: empty fit range");
  if (fit_range.end > frame.length()) throw ContractError("fit_normalize: fit range exceeds the frame");
  NormalizationStats stats;
  for (std::size_t i = 0; i < frame.n_metrics(); ++i) {
    auto m = frame.metric(i);
    auto [lo, hi] = std::minmax_element(m.begin() + static_cast<std::ptrdiff_t>(fit_range.begin),
                                        m.begin() + static_cast<std::ptrdiff_t>(fit_range.end));
    stats.min.push_back(*lo);
    stats.max.push_back(*hi);
  }
  return stats;
}

SeriesFrame apply_normalization(const SeriesFrame& frame, const NormalizationStats& stats) {
  require_stats(frame, stats);
  SeriesFrame out = frame;
  for (std::size_t i = 0; i < out.n_metrics(); ++i) {
    const double lo = stats.min[i];
    const double span = stats.max[i] - lo;
    for (double& v : out.metric(i)) {
      v = span > 0.0 ? std::clamp((v - lo) / span, kNormalizedLow, kNormalizedHigh) : 0.0;
    }
  }
  return out;
}

SeriesFrame invert_normalization(const SeriesFrame& frame, const NormalizationStats& stats) {
  require_stats(frame, stats);
  SeriesFrame out = frame;
  for (std::size_t i = 0; i < out.n_metrics(); ++i) {
    const double lo = stats.min[i];
    const double span = stats.max[i] - lo;
    for (double& v : out.metric(i)) v = lo + v * span;
  }
  return out;
}

std::pair<SeriesFrame, NormalizationStats> fit_normalize(const SeriesFrame& frame, PointRange fit_range) {
  NormalizationStats stats = fit_stats(frame, fit_range);
  return {apply_normalization(frame, stats), std::move(stats)};
}

}  // namespace genad::data
