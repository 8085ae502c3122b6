#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "genad/data/normalize.hpp"
#include "genad/data/series_frame.hpp"
#include "genad/model/config.hpp"
#include "genad/train/checkpoint.hpp"

namespace genad::train {

struct TrainConfig {
  std::uint64_t steps = 2000;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  /// Linear warmup from 0 to lr over this many steps; 0 keeps lr constant.
  std::uint64_t warmup_steps = 0;
  std::uint64_t seed = 0;
  /// Window origins are shuffled in blocks of this many; 0 shuffles the whole epoch.
  std::size_t shuffle_buffer = 0;
  /// Leading fraction of each series used for training (validation included).
  double train_fraction = 0.5;
  /// Tail of the training range held out for validation.
  double validation_fraction = 0.2;
  std::uint64_t log_every = 100;
  /// Validation loss cadence in steps; 0 evaluates only after the last step.
  std::uint64_t eval_every = 0;
};

void validate(const TrainConfig& config);
nlohmann::json to_json(const TrainConfig& config);
/// Overrides fields of `base` present in `doc`; unknown keys throw ContractError.
TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig base = {});

/// Point boundaries of one series: training windows lie in [0, fit_end),
/// validation targets in [fit_end, train_end), test is [train_end, length).
struct Split {
  std::size_t fit_end = 0;
  std::size_t train_end = 0;
  std::size_t length = 0;
};

Split make_split(std::size_t length, const TrainConfig& config);

struct LossPoint {
  std::uint64_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  /// Mean training loss over each log_every block.
  std::vector<LossPoint> running_loss;
  /// Validation loss curve (see TrainConfig::eval_every); empty when the
  /// validation range cannot hold a target segment.
  std::vector<LossPoint> validation_loss;
};

using LogCallback = std::function<void(const LossPoint&)>;

/// Trains a fresh model on a fleet of frames sharing one schema. Each step picks
/// an entity uniformly, draws a batch of windows from its shuffled training
/// origins with a fresh mask plan per window, and applies one Adam update.
/// Normalization statistics are pooled over every entity's training range.
TrainResult pretrain(std::span<const data::SeriesFrame> fleet, const TrainConfig& config,
                     const model::ModelConfig& model_config, const LogCallback& on_log = {});

/// Continues training `base` on one entity with a fresh optimizer and the
/// entity's own statistics. The mask series is kept. Unlike the other entry
/// points, zero steps is accepted and returns the base weights unchanged.
TrainResult finetune(const Checkpoint& base, const data::SeriesFrame& frame, const TrainConfig& config,
                     const LogCallback& on_log = {});

/// Trains a freshly initialized model on one entity.
TrainResult train_scratch(const data::SeriesFrame& frame, const TrainConfig& config,
                          const model::ModelConfig& model_config, const LogCallback& on_log = {});

/// Normalized windows whose target segment lies in the validation range.
std::vector<data::WindowSample> validation_windows(const data::SeriesFrame& normalized, const Split& split,
                                                   std::size_t t_e);

}  // namespace genad::train
