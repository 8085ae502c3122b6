#include "genad/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "genad/data/windows.hpp"
#include "genad/errors.hpp"
#include "genad/io.hpp"
#include "genad/model/mask.hpp"
#include "genad/numerics/adam.hpp"

namespace genad::train {
namespace {

using data::SeriesFrame;
using data::WindowSample;

// Window origins of one entity, handed out in shuffled epochs.
class OriginStream {
 public:
  OriginStream(std::size_t count, std::size_t buffer) : count_(count), buffer_(buffer) {}

  std::size_t next(std::mt19937_64& rng) {
    if (cursor_ == order_.size()) refill(rng);
    return order_[cursor_++];
  }

 private:
  void refill(std::mt19937_64& rng) {
    order_.resize(count_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (buffer_ == 0 || buffer_ >= count_) {
      std::shuffle(order_.begin(), order_.end(), rng);
    } else {
      // Streaming shuffle: emit a random element of a sliding buffer.
      std::vector<std::size_t> pool(order_.begin(), order_.begin() + buffer_);
      std::vector<std::size_t> out;
      out.reserve(count_);
      std::size_t incoming = buffer_;
      while (!pool.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        const std::size_t j = pick(rng);
        out.push_back(pool[j]);
        if (incoming < count_) {
          pool[j] = order_[incoming++];
        } else {
          pool[j] = pool.back();
          pool.pop_back();
        }
      }
      order_ = std::move(out);
    }
    cursor_ = 0;
  }

  std::size_t count_;
  std::size_t buffer_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct Entity {
  SeriesFrame normalized;
  Split split;
  std::size_t n_windows = 0;
};

std::string rng_digest(const std::mt19937_64& rng) {
  std::ostringstream state;
  state << rng;
  char hex[9];
  std::snprintf(hex, sizeof hex, "%08x", io::crc32(state.str()));
  return hex;
}

Entity prepare_entity(const SeriesFrame& frame, const data::NormalizationStats& stats, const TrainConfig& config,
                      std::size_t t_e) {
  Entity e{data::apply_normalization(frame, stats), make_split(frame.length(), config)};
  const std::size_t window = data::kSegments * t_e;
  if (e.split.fit_end < window) {
    throw DataError("series too short: training range has " + std::to_string(e.split.fit_end) +
                    " points, need at least " + std::to_string(window));
  }
  e.n_windows = data::window_count(e.split.fit_end, t_e, 1);
  return e;
}

double validation_loss_of(const std::vector<Entity>& entities, const model::GenADModel& model) {
  std::vector<WindowSample> windows;
  for (const auto& e : entities) {
    auto w = validation_windows(e.normalized, e.split, model.config().t_e);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return model::reconstruction_loss(windows, model);
}

bool has_validation(const std::vector<Entity>& entities, std::size_t t_e) {
  return std::any_of(entities.begin(), entities.end(),
                     [&](const Entity& e) { return e.split.train_end - e.split.fit_end >= t_e; });
}

TrainResult run(model::GenADModel model, std::vector<Entity> entities, data::NormalizationStats stats,
                std::vector<std::string> metric_names, const TrainConfig& config, nlohmann::json info,
                const LogCallback& on_log) {
  const model::ModelConfig& mc = model.config();
  std::mt19937_64 rng(config.seed);
  std::vector<OriginStream> streams;
  for (const auto& e : entities) streams.emplace_back(e.n_windows, config.shuffle_buffer);

  numerics::AdamState adam;
  adam.lr = config.lr;
  TrainResult result{Checkpoint(model), {}, {}};
  const bool validate_curve = has_validation(entities, mc.t_e);
  double block_sum = 0.0;
  std::uint64_t block_count = 0;

  std::vector<WindowSample> batch(config.batch_size);
  std::vector<model::MaskPlan> plans(config.batch_size);
  for (std::uint64_t step = 1; step <= config.steps; ++step) {
    std::uniform_int_distribution<std::size_t> pick(0, entities.size() - 1);
    const std::size_t entity = entities.size() == 1 ? 0 : pick(rng);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      batch[b] = data::make_window(entities[entity].normalized, streams[entity].next(rng), mc.t_e);
      plans[b] = model::build_mask_plan(mc.n_metrics, mc.mask_ratio, rng);
    }

    numerics::Tape tape;
    numerics::BoundParameters bound(tape, model.parameters());
    model::ForwardOptions options{&rng};
    numerics::Var recon = model::forward_batch(bound, model, batch, plans, options);
    numerics::Var loss = model::masked_loss(recon, batch, plans);
    tape.backward(loss);
    const double loss_value = loss.value().item();
    if (!std::isfinite(loss_value)) throw Error("training diverged: non-finite loss at step " + std::to_string(step));

    adam.lr = config.warmup_steps > 0 && step <= config.warmup_steps
                  ? config.lr * static_cast<double>(step) / static_cast<double>(config.warmup_steps)
                  : config.lr;
    numerics::adam_step(adam, model.parameters(), bound.gradients());

    block_sum += loss_value;
    ++block_count;
    if (step % config.log_every == 0 || step == config.steps) {
      if (step % config.log_every == 0) {
        result.running_loss.push_back({step, block_sum / static_cast<double>(block_count)});
        if (on_log) on_log(result.running_loss.back());
      }
      block_sum = 0.0;
      block_count = 0;
    }
    if (validate_curve && config.eval_every > 0 && step % config.eval_every == 0 && step != config.steps) {
      result.validation_loss.push_back({step, validation_loss_of(entities, model)});
    }
  }
  if (validate_curve) result.validation_loss.push_back({config.steps, validation_loss_of(entities, model)});

  info["train_config"] = to_json(config);
  info["splits"] = nlohmann::json::array();
  for (const auto& e : entities) {
    info["splits"].push_back({{"fit_end", e.split.fit_end}, {"train_end", e.split.train_end}, {"length", e.split.length}});
  }
  result.checkpoint = Checkpoint(std::move(model));
  result.checkpoint.stats = std::move(stats);
  result.checkpoint.metric_names = std::move(metric_names);
  result.checkpoint.step = config.steps;
  result.checkpoint.rng_digest = rng_digest(rng);
  result.checkpoint.info = std::move(info);
  return result;
}

data::NormalizationStats pooled_stats(std::span<const SeriesFrame> fleet, const TrainConfig& config) {
  data::NormalizationStats pooled;
  for (const auto& frame : fleet) {
    const Split split = make_split(frame.length(), config);
    if (split.train_end == 0) throw DataError("series too short: no training points");
    const data::NormalizationStats s = data::fit_stats(frame, {0, split.train_end});
    if (pooled.min.empty()) {
      pooled = s;
      continue;
    }
    for (std::size_t i = 0; i < s.min.size(); ++i) {
      pooled.min[i] = std::min(pooled.min[i], s.min[i]);
      pooled.max[i] = std::max(pooled.max[i], s.max[i]);
    }
  }
  return pooled;
}

void check_schema(const SeriesFrame& frame, const model::ModelConfig& mc) {
  if (frame.n_metrics() != mc.n_metrics) {
    throw ContractError("entity has " + std::to_string(frame.n_metrics()) + " metrics, model expects " +
                        std::to_string(mc.n_metrics));
  }
}

TrainResult train_single(model::GenADModel model, const SeriesFrame& frame, const TrainConfig& config,
                         nlohmann::json info, const LogCallback& on_log) {
  frame.validate();
  check_schema(frame, model.config());
  const Split split = make_split(frame.length(), config);
  if (split.train_end == 0) throw DataError("series too short: no training points");
  data::NormalizationStats stats = data::fit_stats(frame, {0, split.train_end});
  std::vector<Entity> entities;
  entities.push_back(prepare_entity(frame, stats, config, model.config().t_e));
  return run(std::move(model), std::move(entities), std::move(stats), frame.metric_names, config, std::move(info),
             on_log);
}

}  // namespace

void validate(const TrainConfig& c) {
  if (c.steps < 1) throw ContractError("train config: steps must be >= 1");
  if (c.batch_size < 1) throw ContractError("train config: batch_size must be >= 1");
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw ContractError("train config: lr must be positive");
  if (!(c.train_fraction > 0.0 && c.train_fraction <= 1.0)) {
    throw ContractError("train config: train_fraction must be in (0, 1]");
  }
  if (!(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0)) {
    throw ContractError("train config: validation_fraction must be in [0, 1)");
  }
  if (c.log_every < 1) throw ContractError("train config: log_every must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"warmup_steps", c.warmup_steps},
          {"seed", c.seed},
          {"shuffle_buffer", c.shuffle_buffer},
          {"train_fraction", c.train_fraction},
          {"validation_fraction", c.validation_fraction},
          {"log_every", c.log_every},
          {"eval_every", c.eval_every}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc, TrainConfig c) {
  if (!doc.is_object()) throw ContractError("train config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "steps") c.steps = value.get<std::uint64_t>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "warmup_steps") c.warmup_steps = value.get<std::uint64_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "shuffle_buffer") c.shuffle_buffer = value.get<std::size_t>();
      else if (key == "train_fraction") c.train_fraction = value.get<double>();
      else if (key == "validation_fraction") c.validation_fraction = value.get<double>();
      else if (key == "log_every") c.log_every = value.get<std::uint64_t>();
      else if (key == "eval_every") c.eval_every = value.get<std::uint64_t>();
      else throw ContractError("train config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw ContractError("train config: bad value for '" + key + "'");
    }
  }
  validate(c);
  return c;
}

Split make_split(std::size_t length, const TrainConfig& config) {
  Split s;
  s.length = length;
  s.train_end = static_cast<std::size_t>(std::floor(config.train_fraction * static_cast<double>(length)));
  const auto held = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(s.train_end)));
  s.fit_end = s.train_end - held;
  return s;
}

std::vector<WindowSample> validation_windows(const SeriesFrame& normalized, const Split& split, std::size_t t_e) {
  std::vector<WindowSample> out;
  const std::size_t window = data::kSegments * t_e;
  if (split.train_end < window || split.train_end - split.fit_end < t_e) return out;
  const std::size_t first_target = std::max(split.fit_end, window - t_e);
  const std::size_t stride = std::max<std::size_t>(1, t_e / 8);
  for (std::size_t target = first_target; target + t_e <= split.train_end; target += stride) {
    out.push_back(data::make_window(normalized, target - (window - t_e), t_e));
  }
  return out;
}

TrainResult pretrain(std::span<const SeriesFrame> fleet, const TrainConfig& config,
                     const model::ModelConfig& model_config, const LogCallback& on_log) {
  validate(config);
  model::validate(model_config);
  if (fleet.empty()) throw ContractError("pretrain: empty fleet");
  for (const auto& frame : fleet) {
    frame.validate();
    if (frame.metric_names != fleet[0].metric_names) {
      throw ContractError("pretrain: every entity must share the same metric names and order");
    }
  }
  check_schema(fleet[0], model_config);
  data::NormalizationStats stats = pooled_stats(fleet, config);
  std::vector<Entity> entities;
  for (const auto& frame : fleet) entities.push_back(prepare_entity(frame, stats, config, model_config.t_e));
  nlohmann::json info = {{"mode", "pretrain"}, {"entities", fleet.size()}};
  return run(model::GenADModel(model_config), std::move(entities), std::move(stats), fleet[0].metric_names, config,
             std::move(info), on_log);
}

TrainResult finetune(const Checkpoint& base, const SeriesFrame& frame, const TrainConfig& config,
                     const LogCallback& on_log) {
  if (!base.metric_names.empty() && frame.metric_names.size() == base.metric_names.size() &&
      frame.metric_names != base.metric_names) {
    throw ContractError("finetune: metric names differ from the base checkpoint");
  }
  // Zero steps is allowed here: the result is the base model refit to the entity's statistics.
  TrainConfig checked = config;
  checked.steps = std::max<std::uint64_t>(checked.steps, 1);
  validate(checked);
  nlohmann::json info = {{"mode", "finetune"}, {"base_step", base.step}, {"base_rng_digest", base.rng_digest}};
  return train_single(base.model, frame, config, std::move(info), on_log);
}

TrainResult train_scratch(const SeriesFrame& frame, const TrainConfig& config, const model::ModelConfig& model_config,
                          const LogCallback& on_log) {
  validate(config);
  model::validate(model_config);
  return train_single(model::GenADModel(model_config), frame, config, {{"mode", "scratch"}}, on_log);
}

}  // namespace genad::train
