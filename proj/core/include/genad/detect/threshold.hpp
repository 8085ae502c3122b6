#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "genad/detect/scoring.hpp"

namespace genad::detect {

inline constexpr std::size_t kDefaultBins = 1000;

/// Equal-width histogram over [min, max] of a set of errors.
struct ErrorHistogram {
  double min = 0.0;
  double max = 0.0;
  /// Bin width (max - min) / bins.
  double delta = 0.0;
  std::vector<std::size_t> counts;
  std::size_t total = 0;
};

/// Throws ContractError for empty input or bins == 0.
ErrorHistogram build_histogram(std::span<const double> errors, std::size_t bins = kDefaultBins);

/// Upper edge of the first bin whose cumulative count reaches
/// (1 - anomaly_rate) of the total; the last bin's edge is the maximum itself.
/// An all-equal histogram returns that value. Throws ContractError unless
/// 0 <= anomaly_rate < 1.
double histogram_gate(const ErrorHistogram& histogram, double anomaly_rate);

/// histogram_gate(build_histogram(errors, bins), a_r + eta).
double estimate_gate(std::span<const double> errors, double a_r, double eta, std::size_t bins = kDefaultBins);

struct ThresholdModel {
  std::vector<double> gates;
  std::size_t gate_entity = 1;
  double a_r = 0.0;
  double eta = 0.0;
  std::vector<ErrorHistogram> histograms;
  /// Validation F1 of the selected setting; absent without labels.
  std::optional<double> validation_f1;
};

/// The correction grid -0.010, -0.009, ..., +0.010.
std::vector<double> default_eta_grid();

/// Per-metric gates from `validation` errors. With labels (one per validation
/// point) (eta, gate_entity) is the grid point with the best point-adjusted F1;
/// ties prefer the smallest |eta|, then negative eta, then the smallest
/// gate_entity. Settings with a_r + eta outside [0, 1) are skipped. Without
/// labels eta = 0 and gate_entity = 1.
ThresholdModel calibrate(const ErrorSeries& validation, std::optional<std::span<const std::uint8_t>> labels, double a_r,
                         std::span<const double> eta_grid, std::size_t bins = kDefaultBins);

ThresholdModel calibrate(const ErrorSeries& validation, std::optional<std::span<const std::uint8_t>> labels,
                         double a_r);

struct DetectionResult {
  /// N x T' flags, metric-major.
  std::vector<std::uint8_t> metric_flags;
  std::vector<std::uint8_t> entity;
  std::vector<std::size_t> anomalous_count;
  std::size_t n_metrics = 0;

  std::uint8_t metric(std::size_t i, std::size_t t) const { return metric_flags[i * entity.size() + t]; }
};

/// Metric i is anomalous at t when e_i(t) > gate_i; the entity is anomalous
/// when at least gate_entity metrics are.
DetectionResult detect_two_level(const ErrorSeries& errors, const ThresholdModel& threshold);

}  // namespace genad::detect
