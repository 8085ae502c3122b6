#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "genad/data/series_frame.hpp"
#include "genad/numerics/tensor.hpp"

namespace genad::data {

inline constexpr std::size_t kSegments = 5;
/// Index of the reconstruction target segment (the latest one).
inline constexpr std::size_t kTargetSegment = 4;

/// One model input: five contiguous, equal-length N x t_e slices in time order
/// (segments 0..3 are the context, segment 4 is the target).
struct WindowSample {
  std::size_t origin = 0;
  std::size_t t_e = 0;
  std::array<numerics::Tensor, kSegments> segments;

  std::size_t n_metrics() const { return segments[0].rows(); }
  const numerics::Tensor& target() const { return segments[kTargetSegment]; }
};

/// Number of windows of length 5 * t_e that start at 0, stride, 2 * stride, ...
std::size_t window_count(std::size_t length, std::size_t t_e, std::size_t stride);

/// The window starting at `origin`; throws DataError if it does not fit.
WindowSample make_window(const SeriesFrame& frame, std::size_t origin, std::size_t t_e);

/// All windows at the given stride. Throws DataError ("series too short") when
/// the frame is shorter than 5 * t_e.
std::vector<WindowSample> make_windows(const SeriesFrame& frame, std::size_t t_e, std::size_t stride);

}  // namespace genad::data
