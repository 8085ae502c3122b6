#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "genad/data/normalize.hpp"
#include "genad/model/genad_model.hpp"

namespace genad::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to score an entity with a trained model.
struct Checkpoint {
  explicit Checkpoint(model::GenADModel m) : model(std::move(m)) {}

  model::GenADModel model;
  data::NormalizationStats stats;
  std::vector<std::string> metric_names;
  std::uint64_t step = 0;
  /// CRC32 (hex) of the serialized training RNG state at the end of training.
  std::string rng_digest;
  /// Free-form training metadata (split boundaries, train config, lineage).
  nlohmann::json info = nlohmann::json::object();
};

/// Binary layout: "GENADCKP", u32 LE version, u32 LE metadata length, JSON
/// metadata, each tensor of the manifest as raw LE f64 (parameters, then the
/// mask series), then a u32 LE CRC32 of every preceding byte.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Writes through a temporary file and a rename.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws CheckpointError with "not a checkpoint", "unsupported version N" or
/// "corrupted checkpoint".
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace genad::train
