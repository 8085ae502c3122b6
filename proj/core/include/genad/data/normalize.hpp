#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "genad/data/series_frame.hpp"

namespace genad::data {

/// Per-metric minimum and maximum of the fit split.
struct NormalizationStats {
  std::vector<double> min;
  std::vector<double> max;

  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

/// Half-open point range [begin, end).
struct PointRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

inline constexpr double kNormalizedLow = -0.5;
inline constexpr double kNormalizedHigh = 1.5;

/// Min-max scales each metric with statistics from `fit_range` only. Values
/// outside the fit range land in [-0.5, 1.5] after clamping; a metric that is
/// constant over the fit range maps to 0 everywhere.
std::pair<SeriesFrame, NormalizationStats> fit_normalize(const SeriesFrame& frame, PointRange fit_range);

NormalizationStats fit_stats(const SeriesFrame& frame, PointRange fit_range);
SeriesFrame apply_normalization(const SeriesFrame& frame, const NormalizationStats& stats);
/// Maps normalized values back to the original scale (exact on unclamped points
/// of non-constant metrics).
SeriesFrame invert_normalization(const SeriesFrame& frame, const NormalizationStats& stats);

}  // namespace genad::data
