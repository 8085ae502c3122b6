#include "genad/model/verify.hpp"

#include <random>

#include "genad/data/windows.hpp"
#include "genad/model/genad_model.hpp"
#include "genad/numerics/attention.hpp"
#include "genad/numerics/ops.hpp"

namespace genad::model {
namespace {

namespace nx = genad::numerics;
using nx::Tensor;
using nx::Var;

Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t({rows, cols});
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Values bounded away from zero so ReLU kinks stay out of the finite-difference stencil.
Tensor away_from_zero(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  Tensor t = random_tensor(rng, rows, cols, 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (double& v : t.values()) v = sign(rng) ? v : -v;
  return t;
}

// Reduces any output to a scalar with fixed random weights, so every output
// element contributes a distinct gradient.
Var weighted_sum(Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor& v = out.value();
  Tensor w = random_tensor(rng, v.rows(), v.cols());
  return nx::sum(nx::mask_multiply(out, w));
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(std::uint64_t seed, const ModelConfig& config,
                                                const nx::GradCheckOptions& options) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<std::string, nx::DiffGraph>> graphs;
  const std::uint64_t w_seed = seed ^ 0x5eedULL;

  auto add = [&](std::string name, nx::ParameterSet params, std::function<Var(nx::Tape&, const nx::BoundParameters&)> f) {
    graphs.emplace_back(std::move(name), nx::DiffGraph{std::move(params), std::move(f)});
  };
  auto reduce = [w_seed](Var v) { return weighted_sum(v, w_seed); };

  add("matmul", {{"a", random_tensor(rng, 3, 4)}, {"b", random_tensor(rng, 4, 5)}},
      [=](nx::Tape&, const nx::BoundParameters& p) { return reduce(nx::matmul(p["a"], p["b"])); });
  add("matmul_nt", {{"a", random_tensor(rng, 3, 4)}, {"b", random_tensor(rng, 5, 4)}},
      [=](nx::Tape&, const nx::BoundParameters& p) { return reduce(nx::matmul_nt(p["a"], p["b"])); });
  add("add_sub_mul_scale", {{"a", random_tensor(rng, 3, 4)}, {"b", random_tensor(rng, 3, 4)}},
      [=](nx::Tape&, const nx::BoundParameters& p) {
        Var s = nx::add(p["a"], p["b"]);
        Var d = nx::sub(p["a"], nx::scale(p["b"], 0.7));
        return reduce(nx::mul(s, d));
      });
  add("add_row", {{"a", random_tensor(rng, 3, 4)}, {"r", random_tensor(rng, 1, 4)}},
      [=](nx::Tape&, const nx::BoundParameters& p) { return reduce(nx::add_row(p["a"], p["r"])); });
  add("linear", {{"x", random_tensor(rng, 3, 4)}, {"w", random_tensor(rng, 4, 2)}, {"b", random_tensor(rng, 1, 2)}},
      [=](nx::Tape&, const nx::BoundParameters& p) { return reduce(nx::linear(p["x"], p["w"], p["b"])); });
  add("relu", {{"a", away_from_zero(rng, 3, 4)}},
      [=](nx::Tape&, const nx::BoundParameters& p) { return reduce(nx::relu(p["a"])); });
  add("softmax_rows", {{"a", random_tensor(rng, 3, 5, -2.0, 2.0)}},
      [=](nx::Tape&, const nx::BoundParameters& p) { return reduce(nx::softmax_rows(p["a"])); });
  add("layer_norm",
      {{"x", random_tensor(rng, 3, 6)}, {"g", random_tensor(rng, 1, 6, 0.5, 1.5)}, {"b", random_tensor(rng, 1, 6)}},
      [=](nx::Tape&, const nx::BoundParameters& p) { return reduce(nx::layer_norm(p["x"], p["g"], p["b"])); });
  add("log_cosh_loss", {{"p", random_tensor(rng, 3, 4, -2.0, 2.0)}, {"t", random_tensor(rng, 3, 4)}},
      [](nx::Tape&, const nx::BoundParameters& p) { return nx::log_cosh_loss(p["p"], p["t"]); });
  add("transpose_slices_concat", {{"a", random_tensor(rng, 4, 5)}, {"b", random_tensor(rng, 2, 5)}},
      [=](nx::Tape&, const nx::BoundParameters& p) {
        const Var rows[] = {nx::slice_rows(p["a"], 1, 3), p["b"]};
        Var stacked = nx::concat_rows(rows);
        const Var cols[] = {nx::slice_cols(stacked, 0, 2), nx::transpose(nx::slice_cols(p["a"], 1, 5))};
        return reduce(nx::concat_cols(cols));
      });
  add("gather_rows", {{"a", random_tensor(rng, 4, 3)}}, [=](nx::Tape&, const nx::BoundParameters& p) {
    const std::size_t index[] = {2, 0, 2, 3, 2};
    return reduce(nx::gather_rows(p["a"], index));
  });
  add("mask_multiply", {{"a", random_tensor(rng, 3, 3)}}, [=](nx::Tape&, const nx::BoundParameters& p) {
    return reduce(nx::mask_multiply(p["a"], Tensor::matrix(3, 3, {0, 2, 1, 1, 0, 3, 2, 2, 0})));
  });
  add("scaled_dot_attention",
      {{"q", random_tensor(rng, 3, 4)}, {"k", random_tensor(rng, 5, 4)}, {"v", random_tensor(rng, 5, 2)}},
      [=](nx::Tape&, const nx::BoundParameters& p) { return reduce(nx::scaled_dot_attention(p["q"], p["k"], p["v"], 4)); });
  add("multi_head_attention",
      {{"q", random_tensor(rng, 6, 4)}, {"k", random_tensor(rng, 6, 4)}, {"v", random_tensor(rng, 6, 4)}},
      [=](nx::Tape&, const nx::BoundParameters& p) {
        return reduce(nx::multi_head_attention(p["q"], p["k"], p["v"], 2, 2));
      });

  // Full model: two random windows, one mask plan each.
  ModelConfig mc = config;
  mc.seed = seed;
  const GenADModel model(mc);
  auto windows = std::make_shared<std::vector<data::WindowSample>>();
  auto plans = std::make_shared<std::vector<MaskPlan>>();
  for (int b = 0; b < 2; ++b) {
    data::WindowSample w;
    w.t_e = mc.t_e;
    for (auto& s : w.segments) s = random_tensor(rng, mc.n_metrics, mc.t_e, 0.0, 1.0);
    windows->push_back(std::move(w));
    plans->push_back(build_mask_plan(mc.n_metrics, mc.mask_ratio, rng));
  }
  add("genad_model", model.parameters(), [=](nx::Tape&, const nx::BoundParameters& p) {
    Var recon = forward_batch(p, model, *windows, *plans);
    return masked_loss(recon, *windows, *plans);
  });

  std::vector<GradCheckEntry> out;
  for (auto& [name, graph] : graphs) {
    nx::GradCheckOptions o = options;
    o.seed = options.seed ^ std::hash<std::string>{}(name);
    out.push_back({name, nx::grad_check(graph, o)});
  }
  return out;
}

}  // namespace genad::model
