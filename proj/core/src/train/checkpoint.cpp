#include "genad/train/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "genad/errors.hpp"
#include "genad/io.hpp"
#include "genad/model/config.hpp"

namespace genad::train {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr std::string_view kMagic = "GENADCKP";
constexpr std::string_view kMaskSeries = "mask_series";

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  std::memcpy(&v, bytes.data() + offset, 4);
  return v;
}

void put_doubles(std::string& out, std::span<const double> values) {
  out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
}

[[noreturn]] void corrupted(const std::string& detail) {
  throw CheckpointError("corrupted checkpoint: " + detail);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const model::ModelConfig& config = ckpt.model.config();
  const model::ParameterManifest manifest = model::parameter_manifest(config);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [name, shape] : manifest) entries.push_back({{"name", name}, {"shape", shape}});
  entries.push_back({{"name", kMaskSeries}, {"shape", {config.t_e}}});

  nlohmann::json meta = {
      {"model_config", model::to_json(config)},
      {"manifest", entries},
      {"stats", {{"min", ckpt.stats.min}, {"max", ckpt.stats.max}}},
      {"metric_names", ckpt.metric_names},
      {"step", ckpt.step},
      {"rng_digest", ckpt.rng_digest},
      {"info", ckpt.info},
  };
  const std::string text = meta.dump();

  std::string out(kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& [name, shape] : manifest) put_doubles(out, ckpt.model.parameters().at(name).values());
  put_doubles(out, ckpt.model.mask_series());
  put_u32(out, io::crc32(out));
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw CheckpointError("not a checkpoint");
  }
  if (bytes.size() < kMagic.size() + 4) corrupted("file ends inside the header");
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported version " + std::to_string(version) + " (this build reads version " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < 20) corrupted("file ends inside the header");
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  if (io::crc32(body) != get_u32(bytes, bytes.size() - 4)) corrupted("checksum mismatch");

  const std::uint32_t meta_len = get_u32(bytes, 12);
  if (16 + static_cast<std::size_t>(meta_len) > body.size()) corrupted("metadata length exceeds file");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(body.substr(16, meta_len));
  } catch (const nlohmann::json::exception& e) {
    corrupted(std::string("metadata: ") + e.what());
  }

  try {
    const model::ModelConfig config = model::model_config_from_json(meta.at("model_config"));
    const model::ParameterManifest manifest = model::parameter_manifest(config);
    const auto& entries = meta.at("manifest");
    if (entries.size() != manifest.size() + 1) corrupted("manifest does not match the model config");

    std::size_t offset = 16 + meta_len;
    auto take = [&](std::size_t count) {
      const std::size_t n_bytes = count * sizeof(double);
      if (offset + n_bytes > body.size()) corrupted("parameter data truncated");
      std::vector<double> values(count);
      std::memcpy(values.data(), body.data() + offset, n_bytes);
      offset += n_bytes;
      return values;
    };

    numerics::ParameterSet params;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      const auto& [name, shape] = manifest[i];
      if (entries[i].at("name").get<std::string>() != name ||
          entries[i].at("shape").get<std::vector<std::size_t>>() != shape) {
        corrupted("manifest entry " + std::to_string(i) + " does not match the model config");
      }
      std::size_t count = 1;
      for (std::size_t e : shape) count *= e;
      params.emplace(name, numerics::Tensor(shape, take(count)));
    }
    std::vector<double> mask = take(config.t_e);
    if (offset != body.size()) corrupted("trailing bytes after parameter data");

    Checkpoint ckpt(model::GenADModel(config, std::move(params), std::move(mask)));
    ckpt.stats.min = meta.at("stats").at("min").get<std::vector<double>>();
    ckpt.stats.max = meta.at("stats").at("max").get<std::vector<double>>();
    ckpt.metric_names = meta.at("metric_names").get<std::vector<std::string>>();
    ckpt.step = meta.at("step").get<std::uint64_t>();
    ckpt.rng_digest = meta.at("rng_digest").get<std::string>();
    ckpt.info = meta.at("info");
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    corrupted(std::string("metadata: ") + e.what());
  } catch (const ContractError& e) {
    corrupted(e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::atomic_write(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(io::read_file(path));
}

}  // namespace genad::train
