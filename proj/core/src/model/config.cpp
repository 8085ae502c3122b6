#include "genad/model/config.hpp"

#include <string>

#include "genad/errors.hpp"

namespace genad::model {

void validate(const ModelConfig& c) {
  if (c.n_metrics < 2) throw ContractError("model: n_metrics must be >= 2");
  if (c.t_e == 0 || c.d_model == 0 || c.n_heads == 0 || c.d_ff == 0) {
    throw ContractError("model: t_e, d_model, n_heads and d_ff must be positive");
  }
  if (c.d_model % c.n_heads != 0) {
    throw ContractError("model: d_model (" + std::to_string(c.d_model) + ") must be divisible by n_heads (" +
                        std::to_string(c.n_heads) + ")");
  }
  if (!(c.mask_ratio > 0.0 && c.mask_ratio < 1.0)) throw ContractError("model: mask_ratio must lie in (0, 1)");
  if (c.n_layers < 2) throw ContractError("model: n_layers must be >= 2");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ContractError("model: dropout must lie in [0, 1)");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"n_metrics", c.n_metrics}, {"t_e", c.t_e},           {"d_model", c.d_model},
          {"n_heads", c.n_heads},     {"n_layers", c.n_layers}, {"d_ff", c.d_ff},
          {"mask_ratio", c.mask_ratio}, {"dropout", c.dropout}, {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& doc, ModelConfig c) {
  if (!doc.is_object()) throw ContractError("model config: expected an object");
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "n_metrics") c.n_metrics = value.get<std::size_t>();
      else if (key == "t_e") c.t_e = value.get<std::size_t>();
      else if (key == "d_model") c.d_model = value.get<std::size_t>();
      else if (key == "n_heads") c.n_heads = value.get<std::size_t>();
      else if (key == "n_layers") c.n_layers = value.get<std::size_t>();
      else if (key == "d_ff") c.d_ff = value.get<std::size_t>();
      else if (key == "mask_ratio") c.mask_ratio = value.get<double>();
      else if (key == "dropout") c.dropout = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ContractError("model config: unknown field '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw ContractError("model config: field '" + key + "' has the wrong type");
    }
  }
  return c;
}

}  // namespace genad::model
