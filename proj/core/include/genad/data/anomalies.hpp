#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "genad/data/series_frame.hpp"
#include "genad/data/synthetic.hpp"

namespace genad::data {

/// One injected anomaly over points [start, start + length).
struct AnomalyEvent {
  std::size_t start = 0;
  std::size_t length = 0;
  AnomalyType type = AnomalyType::Spike;
  std::vector<std::size_t> metrics;
  double magnitude = 0.0;
};

/// Places `plan.count` events inside the plan's region. Segments are pairwise
/// disjoint with at least one normal point between them (colliding draws are
/// redrawn). Correlation breaks target derived metrics when the frame metadata
/// records a recipe graph. Throws PlanError if an event cannot fit.
std::vector<AnomalyEvent> draw_anomaly_events(const AnomalyPlan& plan, const SeriesFrame& frame,
                                              std::uint64_t seed);

/// Applies the events and sets labels to 1 exactly on their points (labels are
/// created as zeros first when the frame has none).
///   spike             add magnitude * (max - min of the metric over the frame)
///   flatline          hold the value preceding the segment
///   correlation_break replace the segment with an unrelated sinusoid of similar level
SeriesFrame inject_anomalies(const SeriesFrame& frame, std::span<const AnomalyEvent> events,
                             std::uint64_t seed);

/// draw_anomaly_events followed by inject_anomalies.
SeriesFrame inject_anomalies(const SeriesFrame& frame, const AnomalyPlan& plan, std::uint64_t seed);

}  // namespace genad::data
