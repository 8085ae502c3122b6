#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>

#include "json.hpp"

#include "genad/data/series_frame.hpp"
#include "genad/detect/evaluation.hpp"
#include "genad/detect/scoring.hpp"
#include "genad/detect/threshold.hpp"
#include "genad/train/checkpoint.hpp"

namespace genad::detect {

struct PipelineOptions {
  double train_fraction = 0.5;
  double validation_fraction = 0.2;
  std::size_t bins = kDefaultBins;
};

/// Split fractions recorded in a checkpoint's training config, or the defaults.
PipelineOptions options_from_checkpoint(const train::Checkpoint& ckpt);

struct PipelineResult {
  ErrorSeries errors;
  ThresholdModel threshold;
  DetectionResult detection;
  /// Scored-point index ranges [begin, end) of the validation and test slices.
  std::size_t validation_begin = 0;
  std::size_t test_begin = 0;
  /// Point-adjusted scores over the test slice; present when the frame has labels.
  std::optional<EvalReport> report;
};

/// score, calibrate on the validation slice, detect every scored point, and
/// evaluate the test slice when labels exist.
PipelineResult run_detection(const data::SeriesFrame& frame, const train::Checkpoint& ckpt, double a_r,
                             const PipelineOptions& options);

/// `timestamp,<metric>_err,...,entity_count,entity_flag`.
void write_scores_csv(const std::filesystem::path& path, const PipelineResult& result);

/// {tp, fp, fn, precision, recall, f1, segments, eta, gate_entity, gates, ...};
/// the score fields are omitted without labels.
nlohmann::json report_json(const PipelineResult& result);

}  // namespace genad::detect
