#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genad/data/windows.hpp"
#include "genad/model/config.hpp"
#include "genad/model/mask.hpp"
#include "genad/numerics/tape.hpp"
#include "genad/numerics/tensor.hpp"

namespace genad::model {

using ParameterManifest = std::vector<std::pair<std::string, std::vector<std::size_t>>>;

/// Names and shapes of every trainable tensor, in initialization order.
ParameterManifest parameter_manifest(const ModelConfig& config);

/// Masked-reconstruction network over the (metric, segment) token grid.
///
/// Every (metric i, segment s) pair becomes one token
///   input_proj(segment content) + metric_embed[i] + segment_embed[s]
/// and all 5N tokens attend to each other in every layer, so attention across
/// metrics within the target segment and across segments of one metric are both
/// sub-patterns of the same attention map. Each layer is multi-head
/// self-attention, output transform, residual + layer norm, then a ReLU
/// feed-forward block, residual + layer norm. A linear head maps each
/// target-segment token back to t_e values.
///
/// Tokens are processed in an order keyed by the metric embeddings rather than
/// by input position, which makes the output exactly equivariant to a joint
/// permutation of metrics and embeddings.
class GenADModel {
 public:
  /// Fresh model: affine maps from seeded Glorot-uniform, embeddings from
  /// N(0, 0.02^2), layer-norm gains 1 and biases 0, and a standard-normal mask
  /// series of length t_e.
  explicit GenADModel(const ModelConfig& config);

  /// Restores a model; throws ContractError if names or shapes disagree with the manifest.
  GenADModel(const ModelConfig& config, numerics::ParameterSet parameters, std::vector<double> mask_series);

  const ModelConfig& config() const noexcept { return config_; }
  std::span<const double> mask_series() const noexcept { return mask_series_; }
  const numerics::ParameterSet& parameters() const noexcept { return params_; }
  numerics::ParameterSet& parameters() noexcept { return params_; }
  std::size_t parameter_count() const { return numerics::parameter_count(params_); }

 private:
  ModelConfig config_;
  numerics::ParameterSet params_;
  std::vector<double> mask_series_;
};

/// Embedded tokens of one window, 5N x d_model, row i * 5 + s for metric i and segment s.
struct TokenGrid {
  numerics::Tensor tokens;
  std::size_t n_metrics = 0;
};

/// Processing order of metrics derived from the embedding rows (lexicographic,
/// ties by index): order[p] is the metric processed at position p.
std::vector<std::size_t> canonical_metric_order(const numerics::Tensor& metric_embed);

/// Segment contents feeding each token, 5N x t_e in (metric, segment) order;
/// masked metrics carry the mask series in their target segment.
numerics::Tensor token_inputs(const data::WindowSample& window, const MaskPlan& plan, const GenADModel& model);

TokenGrid tokenize(const data::WindowSample& window, const MaskPlan& plan, const GenADModel& model);

/// Reconstructed target segment of every metric, N x t_e.
numerics::Tensor forward(const TokenGrid& grid, const GenADModel& model);

/// Mean log-cosh between reconstruction and data over the masked metrics'
/// target segments. Throws ContractError for an empty plan.
double masked_loss(const numerics::Tensor& recon, const data::WindowSample& window, const MaskPlan& plan);

struct Reconstruction {
  numerics::Tensor values;  ///< N x t_e
  numerics::Tensor errors;  ///< |x - x_hat|, N x t_e
};

/// Masks metrics in ceil(N / k) disjoint groups, one pass per group, and takes each
/// metric's reconstruction from the pass where it was masked.
Reconstruction reconstruct_all(const data::WindowSample& window, const GenADModel& model);

/// Mean of reconstruct_all's log-cosh error over every metric and point of the
/// windows' target segments.
double reconstruction_loss(std::span<const data::WindowSample> windows, const GenADModel& model);

// Differentiable building blocks used by training and gradient checks.

struct ForwardOptions {
  /// Training mode: dropout masks are drawn from this generator when the
  /// configured rate is positive. Null means inference.
  std::mt19937_64* dropout_rng = nullptr;
};

/// Reconstructions (batch * N) x t_e for a batch of windows, each with its own
/// plan, rows in natural metric order per window.
numerics::Var forward_batch(const numerics::BoundParameters& params, const GenADModel& model,
                            std::span<const data::WindowSample> windows, std::span<const MaskPlan> plans,
                            const ForwardOptions& options = {});

/// Same as forward_batch but with caller-supplied token inputs, stacked
/// (batch * 5N) x t_e in (metric, segment) order, so gradients can flow to them.
numerics::Var forward_from_inputs(const numerics::BoundParameters& params, const GenADModel& model,
                                  numerics::Var inputs, std::size_t batch, const ForwardOptions& options = {});

/// Mean log-cosh over every masked (window, metric, point) of the batch.
numerics::Var masked_loss(numerics::Var recon, std::span<const data::WindowSample> windows,
                          std::span<const MaskPlan> plans);

}  // namespace genad::model
