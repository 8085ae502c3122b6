#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "genad/data/series_frame.hpp"
#include "genad/model/genad_model.hpp"
#include "genad/numerics/tensor.hpp"
#include "genad/train/checkpoint.hpp"

namespace genad::detect {

/// Absolute reconstruction error per metric and scored point.
struct ErrorSeries {
  std::vector<std::string> metric_names;
  /// Timestamps of the scored points.
  std::vector<std::int64_t> timestamps;
  /// N x T' errors.
  numerics::Tensor errors;
  /// Index in the source frame of the first scored point.
  std::size_t offset = 0;

  std::size_t n_metrics() const { return metric_names.size(); }
  std::size_t length() const { return timestamps.size(); }
  /// Points whose source index lies in [begin, end), clipped to the scored range.
  ErrorSeries slice(std::size_t begin, std::size_t end) const;
};

/// Scores a normalized frame. Windows advance by t_e from the start of the
/// series and each contributes the errors of its target segment, so the scored
/// range is [4 t_e, T); a last window aligned to the end covers a partial tail.
/// Throws DataError when the frame is shorter than one window.
ErrorSeries score(const data::SeriesFrame& normalized, const model::GenADModel& model);

/// Normalizes `frame` with the checkpoint statistics, then scores it.
ErrorSeries score(const data::SeriesFrame& frame, const train::Checkpoint& ckpt);

}  // namespace genad::detect
