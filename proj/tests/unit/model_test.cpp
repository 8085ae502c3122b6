#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "genad/data/synthetic.hpp"
#include "genad/data/windows.hpp"
#include "genad/errors.hpp"
#include "genad/model/genad_model.hpp"
#include "genad/numerics/ops.hpp"
#include "genad/train/trainer.hpp"

using namespace genad;
using namespace genad::model;
using numerics::Tensor;

namespace {

ModelConfig small_config(std::size_t n = 6, std::size_t t_e = 8) {
  ModelConfig c;
  c.n_metrics = n;
  c.t_e = t_e;
  c.d_model = 16;
  c.n_heads = 4;
  c.n_layers = 2;
  c.d_ff = 32;
  c.seed = 3;
  return c;
}

data::WindowSample random_window(std::size_t n, std::size_t t_e, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  data::WindowSample w;
  w.t_e = t_e;
  for (auto& s : w.segments) {
    s = Tensor({n, t_e});
    for (auto& x : s.values()) x = d(rng);
  }
  return w;
}

GenADModel randomized(const ModelConfig& c, std::uint64_t seed) {
  GenADModel m(c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 0.3);
  for (auto& [name, t] : m.parameters())
    for (auto& x : t.values()) x += d(rng);
  return m;
}

}  // namespace

TEST(MaskPlan, Counts) {
  EXPECT_EQ(masked_count(5, 0.2), 1u);
  EXPECT_EQ(masked_count(18, 0.2), 4u);
  EXPECT_EQ(masked_count(2, 0.2), 1u);
  EXPECT_EQ(masked_count(2, 0.9), 1u);
  std::mt19937_64 rng(0);
  EXPECT_EQ(build_mask_plan(5, 0.2, rng).masked.size(), 1u);
  EXPECT_EQ(build_mask_plan(18, 0.2, rng).masked.size(), 4u);
  EXPECT_EQ(build_mask_plan(2, 0.7, rng).masked.size(), 1u);
}

TEST(MaskPlan, RejectsSingleMetric) {
  std::mt19937_64 rng(0);
  EXPECT_THROW(build_mask_plan(1, 0.2, rng), ContractError);
}

TEST(MaskPlan, DistinctSortedAndReproducible) {
  std::mt19937_64 a(42), b(42);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = build_mask_plan(18, 0.3, a);
    EXPECT_EQ(p, build_mask_plan(18, 0.3, b));
    EXPECT_TRUE(std::is_sorted(p.masked.begin(), p.masked.end()));
    EXPECT_EQ(std::adjacent_find(p.masked.begin(), p.masked.end()), p.masked.end());
    EXPECT_LT(p.masked.back(), 18u);
  }
}

TEST(MaskPlan, InferenceGroups) {
  auto five = inference_plans(5, 1);
  ASSERT_EQ(five.size(), 5u);
  auto groups = inference_plans(18, 4);
  ASSERT_EQ(groups.size(), 5u);
  std::vector<std::size_t> sizes, all;
  for (const auto& g : groups) {
    sizes.push_back(g.masked.size());
    all.insert(all.end(), g.masked.begin(), g.masked.end());
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 4, 4, 2}));
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(18);
  std::iota(expect.begin(), expect.end(), 0);
  EXPECT_EQ(all, expect);
}

TEST(Tokenize, EmptyPlanIsIdentity) {
  auto c = small_config();
  GenADModel m(c);
  std::mt19937_64 rng(1);
  auto w = random_window(c.n_metrics, c.t_e, rng);
  auto a = tokenize(w, {}, m), b = tokenize(w, MaskPlan{}, m);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.tokens.rows(), 5 * c.n_metrics);
  EXPECT_EQ(a.tokens.cols(), c.d_model);
}

TEST(Tokenize, SingleMaskedMetricChangesOneToken) {
  auto c = small_config();
  GenADModel m(c);
  std::mt19937_64 rng(2);
  auto w = random_window(c.n_metrics, c.t_e, rng);
  auto base = tokenize(w, {}, m).tokens, masked = tokenize(w, MaskPlan{{3}}, m).tokens;
  std::size_t differing = 0;
  for (std::size_t r = 0; r < base.rows(); ++r) {
    bool same = true;
    for (std::size_t col = 0; col < base.cols(); ++col) same = same && base(r, col) == masked(r, col);
    if (!same) {
      ++differing;
      EXPECT_EQ(r, 3u * 5 + 4);
    }
  }
  EXPECT_EQ(differing, 1u);
  auto inputs = token_inputs(w, MaskPlan{{3}}, m);
  for (std::size_t j = 0; j < c.t_e; ++j) EXPECT_EQ(inputs(3 * 5 + 4, j), m.mask_series()[j]);
}

TEST(Tokenize, MaskHidesContent) {
  auto c = small_config();
  GenADModel m(c);
  std::mt19937_64 rng(3);
  auto w = random_window(c.n_metrics, c.t_e, rng);
  auto v = w;
  for (std::size_t j = 0; j < c.t_e; ++j) v.segments[4](3, j) += 10.0 + j;
  EXPECT_EQ(tokenize(w, MaskPlan{{3}}, m).tokens, tokenize(v, MaskPlan{{3}}, m).tokens);
  EXPECT_NE(tokenize(w, {}, m).tokens, tokenize(v, {}, m).tokens);
}

TEST(Tokenize, DimensionMismatch) {
  auto c = small_config();
  GenADModel m(c);
  std::mt19937_64 rng(4);
  EXPECT_THROW(tokenize(random_window(c.n_metrics + 1, c.t_e, rng), {}, m), ShapeError);
  EXPECT_THROW(tokenize(random_window(c.n_metrics, c.t_e + 1, rng), {}, m), ShapeError);
}

TEST(Forward, DefaultShape) {
  ModelConfig c;
  GenADModel m(c);
  std::mt19937_64 rng(5);
  auto w = random_window(18, 32, rng);
  auto out = forward(tokenize(w, MaskPlan{{0, 5, 9, 17}}, m), m);
  EXPECT_EQ(out.rows(), 18u);
  EXPECT_EQ(out.cols(), 32u);
}

TEST(Forward, UntrainedLossNearPredictZeroBaseline) {
  ModelConfig c;
  GenADModel m(c);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    auto w = random_window(18, 32, rng);
    auto plan = build_mask_plan(18, c.mask_ratio, rng);
    auto out = forward(tokenize(w, plan, m), m);
    EXPECT_TRUE(out.all_finite());
    const double loss = masked_loss(out, w, plan);
    const double baseline = masked_loss(Tensor({18, 32}), w, plan);
    EXPECT_LT(loss, 10.0 * baseline);
  }
}

TEST(Forward, EquivariantUnderJointPermutation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto c = small_config(7, 6);
    auto m = randomized(c, seed);
    std::mt19937_64 rng(100 + seed);
    auto w = random_window(c.n_metrics, c.t_e, rng);
    auto plan = build_mask_plan(c.n_metrics, 0.3, rng);

    std::vector<std::size_t> perm(c.n_metrics);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    auto params = m.parameters();
    const auto& emb = m.parameters().at("embed.metric");
    for (std::size_t j = 0; j < c.n_metrics; ++j)
      for (std::size_t col = 0; col < emb.cols(); ++col) params.at("embed.metric")(j, col) = emb(perm[j], col);
    GenADModel pm(c, params, std::vector<double>(m.mask_series().begin(), m.mask_series().end()));

    auto pw = w;
    for (std::size_t s = 0; s < data::kSegments; ++s)
      for (std::size_t j = 0; j < c.n_metrics; ++j)
        for (std::size_t t = 0; t < c.t_e; ++t) pw.segments[s](j, t) = w.segments[s](perm[j], t);
    MaskPlan pplan;
    for (std::size_t j = 0; j < c.n_metrics; ++j)
      if (plan.contains(perm[j])) pplan.masked.push_back(j);

    auto out = forward(tokenize(w, plan, m), m);
    auto pout = forward(tokenize(pw, pplan, pm), pm);
    for (std::size_t j = 0; j < c.n_metrics; ++j)
      for (std::size_t t = 0; t < c.t_e; ++t) ASSERT_EQ(pout(j, t), out(perm[j], t)) << "seed " << seed;
  }
}

TEST(Forward, MaskingOpacityProperty) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto c = small_config(6, 5);
    auto m = randomized(c, seed);
    std::mt19937_64 rng(200 + seed);
    auto w = random_window(c.n_metrics, c.t_e, rng);
    auto plan = build_mask_plan(c.n_metrics, 0.4, rng);
    auto v = w;
    std::normal_distribution<double> d(0.0, 5.0);
    for (std::size_t i : plan.masked)
      for (std::size_t t = 0; t < c.t_e; ++t) v.segments[4](i, t) = d(rng);
    ASSERT_EQ(forward(tokenize(w, plan, m), m), forward(tokenize(v, plan, m), m)) << "seed " << seed;
  }
}

TEST(Forward, Deterministic) {
  auto c = small_config();
  auto m = randomized(c, 1);
  std::mt19937_64 rng(7);
  std::vector<data::WindowSample> windows{random_window(c.n_metrics, c.t_e, rng), random_window(c.n_metrics, c.t_e, rng)};
  std::vector<MaskPlan> plans{MaskPlan{{1}}, MaskPlan{{0, 4}}};
  auto run = [&] {
    numerics::Tape tape;
    numerics::BoundParameters bound(tape, m.parameters());
    auto loss = masked_loss(forward_batch(bound, m, windows, plans), windows, plans);
    tape.backward(loss);
    return std::make_pair(loss.value(), bound.gradients());
  };
  auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Forward, BatchMatchesSingleWindow) {
  auto c = small_config();
  auto m = randomized(c, 2);
  std::mt19937_64 rng(8);
  std::vector<data::WindowSample> windows{random_window(c.n_metrics, c.t_e, rng), random_window(c.n_metrics, c.t_e, rng)};
  std::vector<MaskPlan> plans{MaskPlan{{1}}, MaskPlan{{0, 4}}};
  numerics::Tape tape;
  numerics::BoundParameters bound(tape, m.parameters(), false);
  auto batch = forward_batch(bound, m, windows, plans).value();
  for (std::size_t b = 0; b < 2; ++b) {
    auto single = forward(tokenize(windows[b], plans[b], m), m);
    for (std::size_t i = 0; i < c.n_metrics; ++i)
      for (std::size_t t = 0; t < c.t_e; ++t) EXPECT_NEAR(batch(b * c.n_metrics + i, t), single(i, t), 1e-12);
  }
}

TEST(Model, ParameterCountIsFunctionOfConfig) {
  auto c = small_config();
  GenADModel a(c);
  c.seed = 99;
  GenADModel b(c);
  EXPECT_EQ(a.parameter_count(), b.parameter_count());
  std::size_t manifest_total = 0;
  for (const auto& [name, shape] : parameter_manifest(c))
    manifest_total += std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  EXPECT_EQ(a.parameter_count(), manifest_total);
  EXPECT_NE(a.parameters(), b.parameters());
  EXPECT_EQ(a.mask_series().size(), c.t_e);
}

TEST(Model, RestoreRejectsWrongShapes) {
  auto c = small_config();
  GenADModel m(c);
  auto params = m.parameters();
  params.at("head.b") = Tensor({1, c.t_e + 1});
  EXPECT_THROW(GenADModel(c, params, std::vector<double>(c.t_e)), ContractError);
  params = m.parameters();
  params.erase("head.b");
  EXPECT_THROW(GenADModel(c, params, std::vector<double>(c.t_e)), ContractError);
}

TEST(Model, ConfigValidation) {
  auto c = small_config();
  c.n_heads = 3;
  EXPECT_THROW(validate(c), ContractError);
  c = small_config();
  c.n_layers = 1;
  EXPECT_THROW(validate(c), ContractError);
  c = small_config();
  c.mask_ratio = 1.0;
  EXPECT_THROW(validate(c), ContractError);
  EXPECT_EQ(model_config_from_json(to_json(small_config())), small_config());
}

TEST(MaskedLoss, ZeroWhenMaskedMetricsMatch) {
  std::mt19937_64 rng(9);
  auto w = random_window(4, 6, rng);
  Tensor recon = w.target();
  for (std::size_t t = 0; t < 6; ++t) recon(0, t) += 3.0;
  EXPECT_EQ(masked_loss(recon, w, MaskPlan{{1, 2}}), 0.0);
  recon(3, 2) -= 100.0;
  EXPECT_EQ(masked_loss(recon, w, MaskPlan{{1, 2}}), 0.0);
}

TEST(MaskedLoss, ConstantOffsetLogTwo) {
  std::mt19937_64 rng(10);
  auto w = random_window(4, 6, rng);
  Tensor recon = w.target();
  for (std::size_t t = 0; t < 6; ++t) recon(2, t) += std::log(2.0);
  EXPECT_NEAR(masked_loss(recon, w, MaskPlan{{2}}), std::log(1.25), 1e-12);
}

TEST(MaskedLoss, EmptyPlan) {
  std::mt19937_64 rng(11);
  auto w = random_window(4, 6, rng);
  EXPECT_THROW(masked_loss(w.target(), w, MaskPlan{}), ContractError);
}

TEST(MaskedLoss, UnmaskedReconstructionsGetNoGradient) {
  auto c = small_config();
  auto m = randomized(c, 4);
  std::mt19937_64 rng(12);
  std::vector<data::WindowSample> windows{random_window(c.n_metrics, c.t_e, rng)};
  std::vector<MaskPlan> plans{MaskPlan{{2, 5}}};
  numerics::Tape tape;
  numerics::BoundParameters bound(tape, m.parameters());
  auto recon = forward_batch(bound, m, windows, plans);
  tape.backward(masked_loss(recon, windows, plans));
  const auto& g = recon.grad();
  for (std::size_t i = 0; i < c.n_metrics; ++i) {
    double norm = 0.0;
    for (std::size_t t = 0; t < c.t_e; ++t) norm += std::abs(g(i, t));
    if (plans[0].contains(i)) EXPECT_GT(norm, 0.0) << i;
    else EXPECT_EQ(norm, 0.0) << i;
  }
}

TEST(ReconstructAll, ErrorsAreAbsoluteDifferences) {
  auto c = small_config(5, 4);
  c.mask_ratio = 0.2;
  auto m = randomized(c, 5);
  std::mt19937_64 rng(13);
  auto w = random_window(5, 4, rng);
  auto r = reconstruct_all(w, m);
  ASSERT_EQ(r.values.rows(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    auto single = forward(tokenize(w, MaskPlan{{i}}, m), m);
    for (std::size_t t = 0; t < 4; ++t) {
      EXPECT_NEAR(r.values(i, t), single(i, t), 1e-12);
      EXPECT_EQ(r.errors(i, t), std::abs(w.target()(i, t) - r.values(i, t)));
    }
  }
}

TEST(ReconstructAll, TrainingReducesErrorOnLinearRecipe) {
  data::SyntheticSpec spec;
  spec.n_metrics = 4;
  spec.n_points = 1200;
  spec.noise = 0.0;
  spec.recipes = {{3, data::RecipeOp::Linear, {1, 2}, {0.5, 0.5}}};
  auto frame = data::gen_genad_synthetic(spec);

  auto mc = small_config(4, 8);
  mc.dropout = 0.0;
  train::TrainConfig tc;
  tc.steps = 1500;
  tc.batch_size = 8;
  tc.lr = 3e-3;
  tc.warmup_steps = 100;
  auto trained = train::train_scratch(frame, tc, mc).checkpoint;
  GenADModel untrained(mc);

  auto normalized = data::apply_normalization(frame, trained.stats);
  auto windows = data::make_windows(normalized.slice(600, 1200), mc.t_e, mc.t_e);
  double e_trained = 0.0, e_untrained = 0.0;
  for (const auto& w : windows) {
    auto a = reconstruct_all(w, trained.model).errors, b = reconstruct_all(w, untrained).errors;
    for (std::size_t t = 0; t < mc.t_e; ++t) e_trained += a(3, t), e_untrained += b(3, t);
  }
  EXPECT_LE(e_trained, 0.5 * e_untrained) << e_trained << " vs " << e_untrained;
}
