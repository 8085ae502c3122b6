#include "genad/model/genad_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "genad/errors.hpp"
#include "genad/numerics/attention.hpp"
#include "genad/numerics/ops.hpp"

namespace genad::model {
namespace {

namespace nx = genad::numerics;
using data::kSegments;
using data::kTargetSegment;
using nx::Tensor;
using nx::Var;

std::string layer_name(std::size_t layer, const char* suffix) {
  return "layer" + std::to_string(layer) + "." + suffix;
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void check_window(const data::WindowSample& w, const ModelConfig& c) {
  if (w.t_e != c.t_e || w.segments[0].rows() != c.n_metrics || w.segments[0].cols() != c.t_e) {
    throw ShapeError("window is " + std::to_string(w.segments[0].rows()) + " metrics x " +
                     std::to_string(w.t_e) + " points per segment, model expects " +
                     std::to_string(c.n_metrics) + " x " + std::to_string(c.t_e));
  }
}

void check_plan(const MaskPlan& plan, std::size_t n_metrics) {
  for (std::size_t i = 0; i < plan.masked.size(); ++i) {
    if (plan.masked[i] >= n_metrics) throw ShapeError("mask plan references metric " + std::to_string(plan.masked[i]));
    if (i > 0 && plan.masked[i] <= plan.masked[i - 1]) throw ContractError("mask plan must be sorted and distinct");
  }
}

// Fills rows [offset, offset + 5N) of `out` with one window's token inputs.
void write_inputs(Tensor& out, std::size_t offset, const data::WindowSample& w, const MaskPlan& plan,
                  std::span<const double> mask_series) {
  const std::size_t n = w.n_metrics();
  const std::size_t t_e = w.t_e;
  for (std::size_t i = 0; i < n; ++i) {
    const bool masked = plan.contains(i);
    for (std::size_t s = 0; s < kSegments; ++s) {
      double* dst = out.data() + (offset + i * kSegments + s) * t_e;
      if (masked && s == kTargetSegment) {
        std::copy(mask_series.begin(), mask_series.end(), dst);
      } else {
        auto src = w.segments[s].row(i);
        std::copy(src.begin(), src.end(), dst);
      }
    }
  }
}

std::vector<std::size_t> inverse(const std::vector<std::size_t>& order) {
  std::vector<std::size_t> rank(order.size());
  for (std::size_t p = 0; p < order.size(); ++p) rank[order[p]] = p;
  return rank;
}

// Row index mapping natural (metric-major) token rows to processing order:
// processed row b*5N + p*5 + s reads natural row b*5N + order[p]*5 + s.
std::vector<std::size_t> to_processing_rows(const std::vector<std::size_t>& order, std::size_t batch) {
  const std::size_t n = order.size();
  std::vector<std::size_t> idx;
  idx.reserve(batch * n * kSegments);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t s = 0; s < kSegments; ++s) idx.push_back(b * n * kSegments + order[p] * kSegments + s);
  return idx;
}

Var dropout(Var x, double rate, std::mt19937_64* rng) {
  if (rng == nullptr || rate <= 0.0) return x;
  Tensor mask(x.value().shape());
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = keep(*rng) ? scale : 0.0;
  return nx::mask_multiply(x, mask);
}

// Token embeddings for inputs already in processing order.
Var embed(const nx::BoundParameters& p, Var inputs, const std::vector<std::size_t>& order, std::size_t batch) {
  const std::size_t n = order.size();
  std::vector<std::size_t> metric_rows;
  std::vector<std::size_t> segment_rows;
  metric_rows.reserve(batch * n * kSegments);
  segment_rows.reserve(batch * n * kSegments);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t q = 0; q < n; ++q)
      for (std::size_t s = 0; s < kSegments; ++s) {
        metric_rows.push_back(order[q]);
        segment_rows.push_back(s);
      }
  Var projected = nx::linear(inputs, p["input.w"], p["input.b"]);
  Var with_metric = nx::add(projected, nx::gather_rows(p["embed.metric"], metric_rows));
  return nx::add(with_metric, nx::gather_rows(p["embed.segment"], segment_rows));
}

// Layer stack and head for tokens in processing order; output rows in natural metric order.
Var encode(const nx::BoundParameters& p, const ModelConfig& c, Var x, const std::vector<std::size_t>& order,
           std::size_t batch, const ForwardOptions& options) {
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    Var q = nx::matmul(x, p[layer_name(l, "attn.wq")]);
    Var k = nx::matmul(x, p[layer_name(l, "attn.wk")]);
    Var v = nx::matmul(x, p[layer_name(l, "attn.wv")]);
    Var attended = nx::multi_head_attention(q, k, v, batch, c.n_heads);
    Var mixed = nx::linear(attended, p[layer_name(l, "attn.wo")], p[layer_name(l, "attn.bo")]);
    mixed = dropout(mixed, c.dropout, options.dropout_rng);
    x = nx::layer_norm(nx::add(x, mixed), p[layer_name(l, "ln1.gamma")], p[layer_name(l, "ln1.beta")]);
    Var hidden = nx::relu(nx::linear(x, p[layer_name(l, "ffn.w1")], p[layer_name(l, "ffn.b1")]));
    Var ff = nx::linear(hidden, p[layer_name(l, "ffn.w2")], p[layer_name(l, "ffn.b2")]);
    ff = dropout(ff, c.dropout, options.dropout_rng);
    x = nx::layer_norm(nx::add(x, ff), p[layer_name(l, "ln2.gamma")], p[layer_name(l, "ln2.beta")]);
  }
  // The head runs in processing order too: GEMM rounding depends on a row's
  // position in the block, so reordering first would break equivariance.
  const std::vector<std::size_t> rank = inverse(order);
  const std::size_t n = order.size();
  std::vector<std::size_t> target_rows;
  std::vector<std::size_t> natural_rows;
  target_rows.reserve(batch * n);
  natural_rows.reserve(batch * n);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t q = 0; q < n; ++q) target_rows.push_back(b * n * kSegments + q * kSegments + kTargetSegment);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n; ++i) natural_rows.push_back(b * n + rank[i]);
  Var recon = nx::linear(nx::gather_rows(x, target_rows), p["head.w"], p["head.b"]);
  return nx::gather_rows(recon, natural_rows);
}

}  // namespace

ParameterManifest parameter_manifest(const ModelConfig& c) {
  validate(c);
  const std::size_t d = c.d_model;
  ParameterManifest m;
  m.push_back({"input.w", {c.t_e, d}});
  m.push_back({"input.b", {1, d}});
  m.push_back({"embed.metric", {c.n_metrics, d}});
  m.push_back({"embed.segment", {kSegments, d}});
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    m.push_back({layer_name(l, "attn.wq"), {d, d}});
    m.push_back({layer_name(l, "attn.wk"), {d, d}});
    m.push_back({layer_name(l, "attn.wv"), {d, d}});
    m.push_back({layer_name(l, "attn.wo"), {d, d}});
    m.push_back({layer_name(l, "attn.bo"), {1, d}});
    m.push_back({layer_name(l, "ln1.gamma"), {1, d}});
    m.push_back({layer_name(l, "ln1.beta"), {1, d}});
    m.push_back({layer_name(l, "ffn.w1"), {d, c.d_ff}});
    m.push_back({layer_name(l, "ffn.b1"), {1, c.d_ff}});
    m.push_back({layer_name(l, "ffn.w2"), {c.d_ff, d}});
    m.push_back({layer_name(l, "ffn.b2"), {1, d}});
    m.push_back({layer_name(l, "ln2.gamma"), {1, d}});
    m.push_back({layer_name(l, "ln2.beta"), {1, d}});
  }
  m.push_back({"head.w", {d, c.t_e}});
  m.push_back({"head.b", {1, c.t_e}});
  return m;
}

GenADModel::GenADModel(const ModelConfig& config) : config_(config) {
  const ParameterManifest manifest = parameter_manifest(config_);
  std::mt19937_64 rng(mix(config_.seed, 0));
  for (const auto& [name, shape] : manifest) {
    Tensor t(shape);
    const bool is_bias = name.ends_with(".b") || name.ends_with(".bo") || name.ends_with(".b1") ||
                         name.ends_with(".b2") || name.ends_with(".beta");
    if (name.ends_with(".gamma")) {
      std::fill(t.values().begin(), t.values().end(), 1.0);
    } else if (name.starts_with("embed.")) {
      std::normal_distribution<double> g(0.0, 0.02);
      for (double& v : t.values()) v = g(rng);
    } else if (!is_bias) {
      const double limit = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (double& v : t.values()) v = u(rng);
    }
    params_.emplace(name, std::move(t));
  }
  std::mt19937_64 mask_rng(mix(config_.seed, 1));
  std::normal_distribution<double> g(0.0, 1.0);
  mask_series_.resize(config_.t_e);
  for (double& v : mask_series_) v = g(mask_rng);
}

GenADModel::GenADModel(const ModelConfig& config, numerics::ParameterSet parameters, std::vector<double> mask_series)
    : config_(config), params_(std::move(parameters)), mask_series_(std::move(mask_series)) {
  const ParameterManifest manifest = parameter_manifest(config_);
  if (manifest.size() != params_.size()) {
    throw ContractError("model expects " + std::to_string(manifest.size()) + " parameter tensors, got " +
                        std::to_string(params_.size()));
  }
  for (const auto& [name, shape] : manifest) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("missing parameter '" + name + "'");
    if (it->second.shape() != shape) {
      throw ContractError("parameter '" + name + "' has shape " + nx::shape_string(it->second.shape()) +
                          ", expected " + nx::shape_string(shape));
    }
  }
  if (mask_series_.size() != config_.t_e) throw ContractError("mask series length must equal t_e");
}

std::vector<std::size_t> canonical_metric_order(const Tensor& metric_embed) {
  const std::size_t n = metric_embed.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ra = metric_embed.row(a);
    auto rb = metric_embed.row(b);
    if (std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end())) return true;
    if (std::lexicographical_compare(rb.begin(), rb.end(), ra.begin(), ra.end())) return false;
    return a < b;
  });
  return order;
}

Tensor token_inputs(const data::WindowSample& window, const MaskPlan& plan, const GenADModel& model) {
  const ModelConfig& c = model.config();
  check_window(window, c);
  check_plan(plan, c.n_metrics);
  Tensor out({c.n_metrics * kSegments, c.t_e});
  write_inputs(out, 0, window, plan, model.mask_series());
  return out;
}

TokenGrid tokenize(const data::WindowSample& window, const MaskPlan& plan, const GenADModel& model) {
  const ModelConfig& c = model.config();
  nx::Tape tape;
  nx::BoundParameters p(tape, model.parameters(), false);
  const auto order = canonical_metric_order(model.parameters().at("embed.metric"));
  Var inputs = tape.constant(token_inputs(window, plan, model));
  Var processed = embed(p, nx::gather_rows(inputs, to_processing_rows(order, 1)), order, 1);
  // Back to (metric, segment) order.
  const auto rank = inverse(order);
  std::vector<std::size_t> natural;
  for (std::size_t i = 0; i < c.n_metrics; ++i)
    for (std::size_t s = 0; s < kSegments; ++s) natural.push_back(rank[i] * kSegments + s);
  return TokenGrid{nx::gather_rows(processed, natural).value(), c.n_metrics};
}

Tensor forward(const TokenGrid& grid, const GenADModel& model) {
  const ModelConfig& c = model.config();
  if (grid.tokens.rank() != 2 || grid.tokens.rows() != c.n_metrics * kSegments || grid.tokens.cols() != c.d_model) {
    throw ShapeError("token grid " + nx::shape_string(grid.tokens.shape()) + " does not match the model");
  }
  nx::Tape tape;
  nx::BoundParameters p(tape, model.parameters(), false);
  const auto order = canonical_metric_order(model.parameters().at("embed.metric"));
  Var x = nx::gather_rows(tape.constant(grid.tokens), to_processing_rows(order, 1));
  return encode(p, c, x, order, 1, {}).value();
}

double masked_loss(const Tensor& recon, const data::WindowSample& window, const MaskPlan& plan) {
  if (plan.masked.empty()) throw ContractError("masked_loss: empty mask plan");
  const Tensor& target = window.target();
  if (!recon.same_shape(target)) {
    throw ShapeError("masked_loss: reconstruction " + nx::shape_string(recon.shape()) + " vs target " +
                     nx::shape_string(target.shape()));
  }
  check_plan(plan, recon.rows());
  double total = 0.0;
  for (std::size_t i : plan.masked) {
    for (std::size_t t = 0; t < recon.cols(); ++t) total += nx::log_cosh(recon(i, t) - target(i, t));
  }
  return total / static_cast<double>(plan.masked.size() * recon.cols());
}

Var forward_from_inputs(const nx::BoundParameters& params, const GenADModel& model, Var inputs, std::size_t batch,
                        const ForwardOptions& options) {
  const ModelConfig& c = model.config();
  const Tensor& iv = inputs.value();
  if (iv.rank() != 2 || iv.rows() != batch * c.n_metrics * kSegments || iv.cols() != c.t_e) {
    throw ShapeError("token inputs " + nx::shape_string(iv.shape()) + " do not match batch " +
                     std::to_string(batch) + " of the model");
  }
  const auto order = canonical_metric_order(params["embed.metric"].value());
  Var processed = nx::gather_rows(inputs, to_processing_rows(order, batch));
  Var x = embed(params, processed, order, batch);
  return encode(params, c, x, order, batch, options);
}

Var forward_batch(const nx::BoundParameters& params, const GenADModel& model,
                  std::span<const data::WindowSample> windows, std::span<const MaskPlan> plans,
                  const ForwardOptions& options) {
  if (windows.empty() || windows.size() != plans.size()) {
    throw ContractError("forward_batch: need one mask plan per window");
  }
  const ModelConfig& c = model.config();
  const std::size_t tokens = c.n_metrics * kSegments;
  Tensor inputs({windows.size() * tokens, c.t_e});
  for (std::size_t b = 0; b < windows.size(); ++b) {
    check_window(windows[b], c);
    check_plan(plans[b], c.n_metrics);
    write_inputs(inputs, b * tokens, windows[b], plans[b], model.mask_series());
  }
  return forward_from_inputs(params, model, params.tape().constant(std::move(inputs)), windows.size(), options);
}

Var masked_loss(Var recon, std::span<const data::WindowSample> windows, std::span<const MaskPlan> plans) {
  if (windows.empty() || windows.size() != plans.size()) {
    throw ContractError("masked_loss: need one mask plan per window");
  }
  const std::size_t n = windows[0].n_metrics();
  const std::size_t t_e = windows[0].t_e;
  std::vector<std::size_t> rows;
  std::vector<double> target;
  for (std::size_t b = 0; b < windows.size(); ++b) {
    if (plans[b].masked.empty()) throw ContractError("masked_loss: empty mask plan");
    for (std::size_t i : plans[b].masked) {
      rows.push_back(b * n + i);
      auto src = windows[b].target().row(i);
      target.insert(target.end(), src.begin(), src.end());
    }
  }
  Var picked = nx::gather_rows(recon, rows);
  Var truth = recon.tape->constant(Tensor({rows.size(), t_e}, std::move(target)));
  return nx::log_cosh_loss(picked, truth);
}

Reconstruction reconstruct_all(const data::WindowSample& window, const GenADModel& model) {
  const ModelConfig& c = model.config();
  check_window(window, c);
  const std::vector<MaskPlan> plans = inference_plans(c.n_metrics, masked_count(c.n_metrics, c.mask_ratio));
  const std::vector<data::WindowSample> windows(plans.size(), window);
  nx::Tape tape;
  nx::BoundParameters p(tape, model.parameters(), false);
  const Tensor& out = forward_batch(p, model, windows, plans).value();
  Reconstruction r{Tensor({c.n_metrics, c.t_e}), Tensor({c.n_metrics, c.t_e})};
  for (std::size_t g = 0; g < plans.size(); ++g) {
    for (std::size_t i : plans[g].masked) {
      for (std::size_t t = 0; t < c.t_e; ++t) {
        const double x_hat = out(g * c.n_metrics + i, t);
        r.values(i, t) = x_hat;
        r.errors(i, t) = std::fabs(window.target()(i, t) - x_hat);
      }
    }
  }
  return r;
}

double reconstruction_loss(std::span<const data::WindowSample> windows, const GenADModel& model) {
  if (windows.empty()) throw ContractError("reconstruction_loss: no windows");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& w : windows) {
    const Reconstruction r = reconstruct_all(w, model);
    for (std::size_t i = 0; i < r.errors.size(); ++i) total += nx::log_cosh(r.errors[i]);
    count += r.errors.size();
  }
  return total / static_cast<double>(count);
}

}  // namespace genad::model
