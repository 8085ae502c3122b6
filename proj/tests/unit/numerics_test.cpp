#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "genad/errors.hpp"
#include "genad/model/verify.hpp"
#include "genad/numerics/adam.hpp"
#include "genad/numerics/attention.hpp"
#include "genad/numerics/gradcheck.hpp"
#include "genad/numerics/ops.hpp"

using namespace genad;
using namespace genad::numerics;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t({r, c});
  for (auto& x : t.values()) x = n(rng);
  return t;
}

}  // namespace

TEST(Softmax, UniformRow) {
  auto s = softmax_rows(Tensor::matrix(1, 2, {0.0, 0.0}));
  EXPECT_DOUBLE_EQ(s(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.5);
}

TEST(Softmax, LogTwo) {
  auto s = softmax_rows(Tensor::matrix(1, 2, {std::log(2.0), 0.0}));
  EXPECT_NEAR(s(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s(0, 1), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  auto s = softmax_rows(Tensor::matrix(1, 2, {1000.0, 1000.0}));
  EXPECT_DOUBLE_EQ(s(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.5);
}

TEST(Softmax, RejectsNonMatrix) {
  EXPECT_THROW(softmax_rows(Tensor({2, 2, 2})), ShapeError);
}

TEST(Softmax, RowsSumToOneProperty) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<std::size_t> ext(1, 40);
    auto t = random_matrix(ext(rng), ext(rng), rng, trial % 3 == 0 ? 300.0 : 3.0);
    auto s = softmax_rows(t);
    for (std::size_t r = 0; r < s.rows(); ++r) {
      double sum = 0.0;
      for (double v : s.row(r)) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(Attention, IdenticalKeysAverageValues) {
  auto q = Tensor::matrix(1, 2, {0.3, -1.2});
  auto k = Tensor::matrix(2, 2, {0.5, 0.5, 0.5, 0.5});
  auto v = Tensor::matrix(2, 3, {1.0, 2.0, 3.0, 5.0, -2.0, 0.0});
  auto out = scaled_dot_attention(q, k, v, 2);
  EXPECT_DOUBLE_EQ(out(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(out(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(out(0, 2), 1.5);
}

TEST(Attention, ScalingHalvesLogitsAtDepthFour) {
  // One query against keys giving logits 2 and 0: with d = 4 the weights are softmax([1, 0]).
  auto q = Tensor::matrix(1, 1, {2.0});
  auto k = Tensor::matrix(2, 1, {1.0, 0.0});
  auto v = Tensor::matrix(2, 1, {1.0, 0.0});
  EXPECT_NEAR(scaled_dot_attention(q, k, v, 1)(0, 0), std::exp(2.0) / (std::exp(2.0) + 1.0), 1e-15);
  EXPECT_NEAR(scaled_dot_attention(q, k, v, 4)(0, 0), std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-15);
}

TEST(Attention, MatchesStraightLineReference) {
  std::mt19937_64 rng(11);
  auto q = random_matrix(3, 4, rng), k = random_matrix(3, 4, rng), v = random_matrix(3, 4, rng);
  auto out = scaled_dot_attention(q, k, v, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    double w[3], mx = -1e300, z = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      w[j] = 0.0;
      for (std::size_t c = 0; c < 4; ++c) w[j] += q(i, c) * k(j, c);
      w[j] /= 2.0;
      mx = std::max(mx, w[j]);
    }
    for (double& x : w) z += (x = std::exp(x - mx));
    for (std::size_t c = 0; c < 4; ++c) {
      double ref = 0.0;
      for (std::size_t j = 0; j < 3; ++j) ref += w[j] / z * v(j, c);
      EXPECT_NEAR(out(i, c), ref, 1e-12);
    }
  }
}

TEST(Attention, RejectsMismatchedInnerExtent) {
  EXPECT_THROW(scaled_dot_attention(Tensor({2, 3}), Tensor({2, 4}), Tensor({2, 2}), 3), ShapeError);
  EXPECT_THROW(scaled_dot_attention(Tensor({2, 3}), Tensor({2, 3}), Tensor({3, 2}), 3), ShapeError);
}

TEST(Attention, OutputInConvexHullOfValues) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    auto q = random_matrix(5, 6, rng, 3.0), k = random_matrix(7, 6, rng, 3.0), v = random_matrix(7, 3, rng);
    auto out = scaled_dot_attention(q, k, v, 6);
    for (std::size_t c = 0; c < 3; ++c) {
      double lo = 1e300, hi = -1e300;
      for (std::size_t j = 0; j < 7; ++j) lo = std::min(lo, v(j, c)), hi = std::max(hi, v(j, c));
      for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_GE(out(i, c), lo - 1e-12);
        EXPECT_LE(out(i, c), hi + 1e-12);
      }
    }
  }
}

TEST(Attention, MultiHeadSingleHeadMatchesPlainAttention) {
  std::mt19937_64 rng(13);
  auto q = random_matrix(6, 4, rng), k = random_matrix(6, 4, rng), v = random_matrix(6, 4, rng);
  Tape tape;
  auto out = multi_head_attention(tape.constant(q), tape.constant(k), tape.constant(v), 2, 1).value();
  for (std::size_t g = 0; g < 2; ++g) {
    Tensor qg({3, 4}), kg({3, 4}), vg({3, 4});
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 4; ++c) {
        qg(r, c) = q(g * 3 + r, c);
        kg(r, c) = k(g * 3 + r, c);
        vg(r, c) = v(g * 3 + r, c);
      }
    auto ref = scaled_dot_attention(qg, kg, vg, 4);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out(g * 3 + r, c), ref(r, c), 1e-12);
  }
}

TEST(LogCosh, ZeroWhenEqual) {
  auto t = Tensor::matrix(2, 2, {1.0, -3.0, 0.5, 8.0});
  EXPECT_EQ(log_cosh_loss(t, t), 0.0);
}

TEST(LogCosh, LogTwoDelta) {
  EXPECT_NEAR(log_cosh_loss(Tensor::scalar(std::log(2.0)), Tensor::scalar(0.0)), std::log(1.25), 1e-15);
  EXPECT_NEAR(std::log(1.25), 0.223144, 1e-6);
}

TEST(LogCosh, LargeDeltaAsymptote) {
  EXPECT_NEAR(log_cosh_loss(Tensor::scalar(50.0), Tensor::scalar(0.0)), 50.0 - std::log(2.0), 1e-9);
  EXPECT_TRUE(std::isfinite(log_cosh(1000.0)));
}

TEST(LogCosh, ShapeMismatch) {
  EXPECT_THROW(log_cosh_loss(Tensor({1, 2}), Tensor({2, 1})), ShapeError);
}

TEST(LogCosh, SymmetricAndNonNegativeProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_matrix(3, 5, rng, 10.0), b = random_matrix(3, 5, rng, 10.0);
    double ab = log_cosh_loss(a, b);
    EXPECT_EQ(ab, log_cosh_loss(b, a));
    EXPECT_GT(ab, 0.0);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParameterSet params{{"w", Tensor::matrix(1, 2, {1.0, -2.0})}};
  ParameterSet grads{{"w", Tensor({1, 2})}};
  AdamState state;
  adam_step(state, params, grads);
  EXPECT_EQ(params.at("w"), Tensor::matrix(1, 2, {1.0, -2.0}));
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  ParameterSet params{{"w", Tensor::scalar(3.0)}};
  AdamState state;
  const double g = -0.25;
  adam_step(state, params, {{"w", Tensor::scalar(g)}});
  EXPECT_NEAR(params.at("w").item() - 3.0, -state.lr * g / (std::abs(g) + state.eps), 1e-15);
  EXPECT_NEAR(params.at("w").item(), 3.0 + 1e-3, 1e-10);
}

TEST(Adam, QuadraticTraceMatchesReference) {
  // f(w) = 0.5 * a * w^2, so g = a * w.
  const double a = 3.0;
  ParameterSet params{{"w", Tensor::scalar(2.0)}};
  AdamState state;
  state.lr = 0.1;
  double w = 2.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const double g = a * w;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
    w -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    adam_step(state, params, {{"w", Tensor::scalar(a * params.at("w").item())}});
    EXPECT_NEAR(params.at("w").item(), w, 1e-12) << "step " << t;
  }
  EXPECT_EQ(state.step, 5u);
}

TEST(Adam, ShapeMismatch) {
  ParameterSet params{{"w", Tensor({1, 2})}};
  AdamState state;
  EXPECT_THROW(adam_step(state, params, {{"w", Tensor({2, 1})}}), ShapeError);
}

TEST(Adam, SecondMomentStaysNonNegative) {
  std::mt19937_64 rng(3);
  ParameterSet params{{"w", random_matrix(3, 3, rng)}};
  AdamState state;
  for (int t = 0; t < 20; ++t) adam_step(state, params, {{"w", random_matrix(3, 3, rng)}});
  for (double x : state.v.at("w").values()) EXPECT_GE(x, 0.0);
  EXPECT_TRUE(state.m.at("w").same_shape(params.at("w")));
}

TEST(GradCheck, SumOfSquares) {
  DiffGraph g;
  g.parameters["theta"] = Tensor::matrix(1, 2, {1.0, 2.0});
  g.loss = [](Tape&, const BoundParameters& p) {
    auto t = p["theta"];
    return sum(mul(t, t));
  };
  auto r = grad_check(g);
  EXPECT_LT(r.max_relative_error, 1e-8);
  EXPECT_EQ(r.checked, 2u);

  Tape tape;
  BoundParameters bound(tape, g.parameters);
  tape.backward(g.loss(tape, bound));
  auto grads = bound.gradients();
  EXPECT_NEAR(grads.at("theta")[0], 2.0, 1e-15);
  EXPECT_NEAR(grads.at("theta")[1], 4.0, 1e-15);
}

TEST(GradCheck, ConstantLossHasZeroGradient) {
  DiffGraph g;
  g.parameters["theta"] = Tensor::matrix(1, 3, {1.0, 2.0, 3.0});
  g.loss = [](Tape& tape, const BoundParameters& p) {
    return add(scale(sum(p["theta"]), 0.0), tape.constant(Tensor::scalar(4.0)));
  };
  Tape tape;
  BoundParameters bound(tape, g.parameters);
  tape.backward(g.loss(tape, bound));
  const auto grads = bound.gradients();
  for (double x : grads.at("theta").values()) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(grad_check(g).max_relative_error, 0.0);
}

TEST(GradCheck, RejectsNonScalarLossAndBadEpsilon) {
  DiffGraph g;
  g.parameters["theta"] = Tensor::matrix(1, 2, {1.0, 2.0});
  g.loss = [](Tape&, const BoundParameters& p) { return p["theta"]; };
  EXPECT_THROW(grad_check(g), ContractError);
  g.loss = [](Tape&, const BoundParameters& p) { return sum(p["theta"]); };
  GradCheckOptions o;
  o.epsilon = 1e-2;
  EXPECT_THROW(grad_check(g, o), ContractError);
}

TEST(GradCheck, DetectsCorruptedGradient) {
  DiffGraph g;
  g.parameters["theta"] = Tensor::matrix(1, 2, {1.0, 2.0});
  g.loss = [](Tape&, const BoundParameters& p) { return sum(mul(p["theta"], p["theta"])); };
  GradCheckOptions o;
  o.corrupt_gradient = 0.01;
  EXPECT_GT(grad_check(g, o).max_relative_error, 1e-3);
}

TEST(GradCheck, OneLayerAttentionNetwork) {
  model::ModelConfig mc;
  mc.n_metrics = 3;
  mc.t_e = 4;
  mc.d_model = 8;
  mc.n_heads = 2;
  mc.n_layers = 2;
  mc.d_ff = 8;
  for (const auto& entry : model::run_gradcheck_suite(21, mc, {})) {
    EXPECT_LT(entry.result.max_relative_error, 1e-4) << entry.name;
    EXPECT_GT(entry.result.checked, 0u) << entry.name;
  }
}

TEST(Tape, GradientShapesMatchParameters) {
  std::mt19937_64 rng(9);
  ParameterSet params{{"w", random_matrix(4, 3, rng)}, {"b", random_matrix(1, 3, rng)}};
  Tape tape;
  BoundParameters bound(tape, params);
  auto x = tape.constant(random_matrix(5, 4, rng));
  tape.backward(log_cosh_loss(relu(linear(x, bound["w"], bound["b"])), tape.constant(Tensor({5, 3}))));
  auto grads = bound.gradients();
  for (const auto& [name, value] : params) EXPECT_TRUE(grads.at(name).same_shape(value)) << name;
}

TEST(Tape, DeterministicAcrossRuns) {
  auto run = [] {
    std::mt19937_64 rng(4);
    ParameterSet params{{"w", random_matrix(6, 6, rng)}};
    Tape tape;
    BoundParameters bound(tape, params);
    auto x = tape.constant(random_matrix(6, 6, rng));
    auto y = layer_norm(softmax_rows(matmul(x, bound["w"])), tape.constant(Tensor({1, 6}, 1.0)),
                        tape.constant(Tensor({1, 6})));
    tape.backward(sum(mul(y, y)));
    return bound.gradients().at("w");
  };
  EXPECT_EQ(run(), run());
}
