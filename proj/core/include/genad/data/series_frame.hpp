#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace genad::data {

/// N metrics sampled on a shared, evenly spaced timeline.
///
/// Values are stored metric-major: `values[i * length() + t]` is metric i at
/// point t. Labels, when present, hold one 0/1 flag per point.
struct SeriesFrame {
  std::vector<std::string> metric_names;
  std::vector<std::int64_t> timestamps;
  std::vector<double> values;
  std::optional<std::vector<std::uint8_t>> labels;
  /// Free-form provenance (generator parameters, recipe graph, injected events).
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t n_metrics() const noexcept { return metric_names.size(); }
  std::size_t length() const noexcept { return timestamps.size(); }

  double& at(std::size_t metric, std::size_t t) { return values[metric * length() + t]; }
  double at(std::size_t metric, std::size_t t) const { return values[metric * length() + t]; }

  std::span<double> metric(std::size_t i) { return std::span<double>(values).subspan(i * length(), length()); }
  std::span<const double> metric(std::size_t i) const {
    return std::span<const double>(values).subspan(i * length(), length());
  }

  /// Points [begin, end) of every metric, labels included.
  SeriesFrame slice(std::size_t begin, std::size_t end) const;

  /// Throws DataError unless N >= 2, T >= 1, extents agree, timestamps strictly
  /// increase with constant spacing and every value is finite.
  void validate() const;
};

/// Zero-filled frame with names m00, m01, ... and timestamps start, start+step, ...
SeriesFrame make_frame(std::size_t n_metrics, std::size_t length, std::int64_t start = 0,
                       std::int64_t step = 1);

}  // namespace genad::data
