#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "genad/data/anomalies.hpp"
#include "genad/data/normalize.hpp"
#include "genad/data/synthetic.hpp"
#include "genad/detect/evaluation.hpp"
#include "genad/detect/pipeline.hpp"
#include "genad/detect/scoring.hpp"
#include "genad/detect/threshold.hpp"
#include "genad/errors.hpp"
#include "genad/train/trainer.hpp"

using namespace genad;
using namespace genad::detect;
using numerics::Tensor;
using Flags = std::vector<std::uint8_t>;

namespace {

ErrorSeries make_errors(std::size_t n, std::size_t t, std::mt19937_64& rng) {
  ErrorSeries e;
  for (std::size_t i = 0; i < n; ++i) e.metric_names.push_back("m" + std::to_string(i));
  for (std::size_t k = 0; k < t; ++k) e.timestamps.push_back(static_cast<std::int64_t>(60 * k));
  e.errors = Tensor({n, t});
  std::exponential_distribution<double> d(10.0);
  for (auto& x : e.errors.values()) x = d(rng);
  return e;
}

double sorted_quantile(std::vector<double> v, double rate) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  auto needed = static_cast<std::size_t>(std::ceil((1.0 - rate) * n - 1e-9));
  needed = std::clamp<std::size_t>(needed, 1, v.size());
  return v[needed - 1];
}

Flags from_indices(std::size_t n, std::initializer_list<std::size_t> ones) {
  Flags f(n, 0);
  for (auto i : ones) f[i] = 1;
  return f;
}

}  // namespace

TEST(Gate, OneToThousandAtFivePercent) {
  std::vector<double> e(1000);
  std::iota(e.begin(), e.end(), 1.0);
  const double delta = 999.0 / 1000.0;
  EXPECT_NEAR(estimate_gate(e, 0.05, 0.0), 950.0, delta);
  EXPECT_EQ(estimate_gate(e, 0.05, 0.0), estimate_gate(e, 0.04, 0.01));
}

TEST(Gate, ZeroRateGivesMaximum) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> e(777);
  for (double& x : e) x = std::abs(d(rng));
  EXPECT_GE(estimate_gate(e, 0.0, 0.0), *std::max_element(e.begin(), e.end()));
  EXPECT_GE(estimate_gate(e, 0.01, -0.01), *std::max_element(e.begin(), e.end()));
}

TEST(Gate, DegenerateInput) {
  std::vector<double> e(50, 7.0);
  for (double a : {0.0, 0.01, 0.3, 0.99}) EXPECT_EQ(estimate_gate(e, a, 0.0), 7.0);
}

TEST(Gate, Errors) {
  std::vector<double> e{1.0, 2.0};
  EXPECT_THROW(estimate_gate(std::vector<double>{}, 0.1, 0.0), ContractError);
  EXPECT_THROW(estimate_gate(e, 0.995, 0.01), ContractError);
  EXPECT_THROW(estimate_gate(e, 0.01, -0.02), ContractError);
}

TEST(Gate, SortedQuantileOracleProperty) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<std::size_t> len(100, 3000);
    std::vector<double> e(len(rng));
    std::lognormal_distribution<double> d(0.0, 1.0);
    for (double& x : e) x = d(rng);
    const auto [lo, hi] = std::minmax_element(e.begin(), e.end());
    const double delta = (*hi - *lo) / 1000.0;
    for (double a : {0.01, 0.05, 0.1}) {
      const double gate = estimate_gate(e, a, 0.0);
      EXPECT_LE(std::abs(gate - sorted_quantile(e, a)), delta * (1 + 1e-9));
      EXPECT_GE(gate, *lo);
      EXPECT_LE(gate, *hi);
    }
  }
}

TEST(Gate, MonotoneInRateProperty) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> e(500);
    std::gamma_distribution<double> d(2.0, 1.0);
    for (double& x : e) x = d(rng);
    double prev = estimate_gate(e, 0.0, 0.0);
    for (double a = 0.005; a < 0.9; a += 0.005) {
      const double g = estimate_gate(e, a, 0.0);
      EXPECT_LE(g, prev);
      prev = g;
    }
  }
}

TEST(Gate, EtaGrid) {
  auto grid = default_eta_grid();
  ASSERT_EQ(grid.size(), 21u);
  EXPECT_NEAR(grid.front(), -0.010, 1e-15);
  EXPECT_NEAR(grid.back(), 0.010, 1e-15);
  EXPECT_EQ(std::count(grid.begin(), grid.end(), 0.0), 1);
}

TEST(Calibrate, WithoutLabelsUsesDefaults) {
  std::mt19937_64 rng(4);
  auto e = make_errors(4, 300, rng);
  auto th = calibrate(e, std::nullopt, 0.05);
  EXPECT_EQ(th.eta, 0.0);
  EXPECT_EQ(th.gate_entity, 1u);
  EXPECT_FALSE(th.validation_f1.has_value());
  ASSERT_EQ(th.gates.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> row(e.errors.row(i).begin(), e.errors.row(i).end());
    EXPECT_EQ(th.gates[i], estimate_gate(row, 0.05, 0.0));
  }
}

TEST(Calibrate, EmptyValidationSlice) {
  ErrorSeries e;
  e.metric_names = {"a", "b"};
  EXPECT_THROW(calibrate(e, std::nullopt, 0.05), ContractError);
}

TEST(Calibrate, SearchDominatesFixedEtaZero) {
  std::mt19937_64 rng(5);
  auto e = make_errors(6, 400, rng);
  Flags labels(400, 0);
  for (std::size_t t = 200; t < 215; ++t) {
    labels[t] = 1;
    e.errors(1, t) += 2.0;
    e.errors(4, t) += 1.0;
  }
  auto th = calibrate(e, std::span<const std::uint8_t>(labels), 0.02);
  ASSERT_TRUE(th.validation_f1.has_value());
  EXPECT_GE(th.gate_entity, 1u);
  EXPECT_LE(th.gate_entity, 5u);
  for (std::size_t ge = 1; ge <= 5; ++ge) {
    ThresholdModel fixed = calibrate(e, std::nullopt, 0.02);
    fixed.gate_entity = ge;
    const double f1 = evaluate(detect_two_level(e, fixed).entity, labels).f1;
    EXPECT_GE(*th.validation_f1, f1) << "gate_entity " << ge;
  }
  EXPECT_EQ(*th.validation_f1, evaluate(detect_two_level(e, th).entity, labels).f1);
}

TEST(Calibrate, InvariantToMetricReordering) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    auto e = make_errors(5, 300, rng);
    Flags labels(300, 0);
    for (std::size_t t = 100; t < 110; ++t) labels[t] = 1, e.errors(2, t) += 0.3, e.errors(3, t) += 0.2;
    for (std::size_t t = 250; t < 254; ++t) labels[t] = 1, e.errors(0, t) += 0.15;
    std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    ErrorSeries p = e;
    for (std::size_t j = 0; j < 5; ++j) {
      p.metric_names[j] = e.metric_names[perm[j]];
      for (std::size_t t = 0; t < 300; ++t) p.errors(j, t) = e.errors(perm[j], t);
    }
    auto a = calibrate(e, std::span<const std::uint8_t>(labels), 0.03);
    auto b = calibrate(p, std::span<const std::uint8_t>(labels), 0.03);
    EXPECT_EQ(a.eta, b.eta);
    EXPECT_EQ(a.gate_entity, b.gate_entity);
    EXPECT_EQ(a.validation_f1, b.validation_f1);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(b.gates[j], a.gates[perm[j]]);
  }
}

TEST(TwoLevel, EntityGateCounts) {
  ErrorSeries e;
  e.metric_names = {"a", "b", "c"};
  e.timestamps = {0, 1};
  e.errors = Tensor::matrix(3, 2, {2.0, 2.0, 0.5, 2.0, 0.5, 0.5});
  ThresholdModel th;
  th.gates = {1.0, 1.0, 1.0};
  th.gate_entity = 2;
  auto r = detect_two_level(e, th);
  EXPECT_EQ(r.entity, (Flags{0, 1}));
  EXPECT_EQ(r.anomalous_count, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(r.metric(0, 0), 1);
  EXPECT_EQ(r.metric(1, 0), 0);
  th.gates = {5.0, 5.0, 5.0};
  th.gate_entity = 1;
  r = detect_two_level(e, th);
  EXPECT_EQ(r.entity, (Flags{0, 0}));
  EXPECT_TRUE(std::all_of(r.metric_flags.begin(), r.metric_flags.end(), [](auto f) { return f == 0; }));
}

TEST(TwoLevel, StrictMetricComparison) {
  ErrorSeries e;
  e.metric_names = {"a", "b"};
  e.timestamps = {0};
  e.errors = Tensor::matrix(2, 1, {1.0, 1.0});
  ThresholdModel th;
  th.gates = {1.0, 0.999};
  EXPECT_EQ(detect_two_level(e, th).anomalous_count[0], 1u);
}

TEST(TwoLevel, DimensionMismatch) {
  std::mt19937_64 rng(7);
  auto e = make_errors(3, 10, rng);
  ThresholdModel th;
  th.gates = {1.0, 1.0};
  EXPECT_THROW(detect_two_level(e, th), ShapeError);
}

TEST(TwoLevel, InvariantUnderMonotoneRescalingProperty) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto e = make_errors(4, 200, rng);
    auto th = calibrate(e, std::nullopt, 0.05);
    th.gate_entity = 1 + trial % 3;
    auto base = detect_two_level(e, th);
    auto scaled = e;
    auto sth = th;
    for (std::size_t i = 0; i < 4; ++i) {
      auto f = [i](double x) { return std::exp(3.0 * x) * (i + 1) + 7.0 * i; };
      for (std::size_t t = 0; t < 200; ++t) scaled.errors(i, t) = f(e.errors(i, t));
      sth.gates[i] = f(th.gates[i]);
    }
    auto r = detect_two_level(scaled, sth);
    EXPECT_EQ(r.metric_flags, base.metric_flags);
    EXPECT_EQ(r.entity, base.entity);
  }
}

TEST(PointAdjust, FillsDetectedRun) {
  Flags truth(15, 0);
  for (std::size_t t = 5; t <= 10; ++t) truth[t] = 1;
  auto adj = point_adjust(from_indices(15, {7}), truth);
  EXPECT_EQ(adj, truth);
}

TEST(PointAdjust, LeavesFalsePositivesAndEmptyPredictions) {
  Flags truth(10, 0);
  auto pred = from_indices(10, {3});
  EXPECT_EQ(point_adjust(pred, truth), pred);
  Flags none(10, 0);
  truth[4] = truth[5] = 1;
  EXPECT_EQ(point_adjust(none, truth), none);
}

TEST(PointAdjust, LengthMismatch) {
  EXPECT_THROW(point_adjust(Flags(3, 0), Flags(4, 0)), ShapeError);
  EXPECT_THROW(prf1(Flags(3, 0), Flags(4, 0)), ShapeError);
}

TEST(PointAdjust, RecallNeverDropsAndOutsideUnchangedProperty) {
  std::mt19937_64 rng(9);
  std::bernoulli_distribution p(0.1), q(0.15);
  for (int trial = 0; trial < 300; ++trial) {
    Flags pred(120), truth(120);
    for (auto& x : pred) x = p(rng);
    for (auto& x : truth) x = q(rng);
    auto adj = point_adjust(pred, truth);
    auto raw = prf1(pred, truth), fixed = prf1(adj, truth);
    EXPECT_GE(fixed.recall, raw.recall);
    EXPECT_EQ(fixed.fp, raw.fp);
    for (std::size_t t = 0; t < 120; ++t) {
      if (!truth[t]) {
        EXPECT_EQ(adj[t], pred[t]);
      }
    }
  }
}

TEST(Prf1, HighPrecisionFullRecall) {
  EXPECT_NEAR(std::round(f1_score(0.910, 1.000) * 1000.0) / 1000.0, 0.953, 1e-12);
}

TEST(Prf1, DegenerateAndPerfect) {
  auto truth = from_indices(8, {2, 3});
  auto none = prf1(from_indices(8, {6}), truth);
  EXPECT_EQ(none.tp, 0u);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  auto empty = prf1(Flags(8, 0), Flags(8, 0));
  EXPECT_EQ(empty.f1, 0.0);
  auto perfect = prf1(truth, truth);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
}

TEST(Prf1, HarmonicMeanBoundsProperty) {
  std::mt19937_64 rng(10);
  std::bernoulli_distribution p(0.3);
  for (int trial = 0; trial < 300; ++trial) {
    Flags pred(50), truth(50);
    for (auto& x : pred) x = p(rng);
    for (auto& x : truth) x = p(rng);
    auto r = evaluate(pred, truth);
    EXPECT_LE(r.f1, std::min(2 * r.precision, 2 * r.recall) + 1e-15);
    if (r.precision + r.recall > 0) {
      EXPECT_NEAR(r.f1, 2 * r.precision * r.recall / (r.precision + r.recall), 1e-15);
    }
    EXPECT_EQ(r.tp + r.fn, static_cast<std::size_t>(std::count(truth.begin(), truth.end(), 1)));
  }
}

TEST(Runs, Segments) {
  auto s = runs(from_indices(10, {0, 1, 4, 9}));
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].begin, 0u);
  EXPECT_EQ(s[0].end, 2u);
  EXPECT_EQ(s[2].begin, 9u);
  EXPECT_EQ(s[2].end, 10u);
}

namespace {

model::ModelConfig score_model(std::size_t n, std::size_t t_e) {
  model::ModelConfig c;
  c.n_metrics = n;
  c.t_e = t_e;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_layers = 2;
  c.d_ff = 16;
  c.dropout = 0.0;
  return c;
}

}  // namespace

TEST(Score, OneWindowScoresItsTarget) {
  auto frame = data::make_frame(3, 160);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> d(0.5, 0.2);
  for (double& v : frame.values) v = d(rng);
  model::GenADModel m(score_model(3, 32));
  auto a = score(frame, m);
  EXPECT_EQ(a.length(), 32u);
  EXPECT_EQ(a.offset, 128u);
  EXPECT_EQ(a.timestamps.front(), 128);
  auto b = score(frame, m);
  EXPECT_EQ(a.errors, b.errors);
  for (double x : a.errors.values()) EXPECT_GE(x, 0.0);
  EXPECT_THROW(score(data::make_frame(3, 159), m), DataError);
}

TEST(Score, CoversTailExactlyOnce) {
  auto frame = data::make_frame(3, 203);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> d(0.5, 0.2);
  for (double& v : frame.values) v = d(rng);
  model::GenADModel m(score_model(3, 10));
  auto e = score(frame, m);
  EXPECT_EQ(e.length(), 203u - 40u);
  // Points 190..199 come from the last stride window, 200..202 from the tail window.
  // Batched scoring matches single-window reconstruction to rounding only.
  auto stride_last = model::reconstruct_all(data::make_window(frame, 150, 10), m).errors;
  auto tail = model::reconstruct_all(data::make_window(frame, 203 - 50, 10), m).errors;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t t = 0; t < 10; ++t) EXPECT_NEAR(e.errors(i, 190 - 40 + t), stride_last(i, t), 1e-12);
    for (std::size_t t = 7; t < 10; ++t) EXPECT_NEAR(e.errors(i, 193 - 40 + t), tail(i, t), 1e-12);
  }
  auto s = e.slice(100, 150);
  EXPECT_EQ(s.offset, 100u);
  EXPECT_EQ(s.length(), 50u);
  EXPECT_EQ(s.errors(2, 0), e.errors(2, 60));
}

TEST(Score, FlatlineOnDerivedMetricStandsOut) {
  data::SyntheticSpec spec;
  spec.n_metrics = 6;
  spec.n_points = 1600;
  spec.noise = 0.01;
  spec.recipes = {{4, data::RecipeOp::Linear, {0, 1}, {0.5, 0.5}}, {5, data::RecipeOp::Product, {2, 3}, {1.0}}};
  auto clean = data::gen_genad_synthetic(spec);

  train::TrainConfig tc;
  tc.steps = 2500;
  tc.batch_size = 8;
  tc.lr = 3e-3;
  tc.warmup_steps = 100;
  auto ckpt = train::train_scratch(clean, tc, score_model(6, 8)).checkpoint;

  std::vector<data::AnomalyEvent> events;
  for (std::size_t start : {900u, 1100u, 1300u, 1500u}) {
    data::AnomalyEvent ev;
    ev.start = start;
    ev.length = 20;
    ev.type = data::AnomalyType::Flatline;
    ev.metrics = {4};
    events.push_back(ev);
  }
  auto frame = data::inject_anomalies(clean, events, 1);
  auto e = score(frame, ckpt);
  double anomalous = 0.0, normal = 0.0;
  std::size_t na = 0, nn = 0;
  for (std::size_t t = 0; t < e.length(); ++t) {
    if (e.offset + t < 800) continue;
    if ((*frame.labels)[e.offset + t]) anomalous += e.errors(4, t), ++na;
    else normal += e.errors(4, t), ++nn;
  }
  ASSERT_EQ(na, 80u);
  EXPECT_GT(anomalous / na, 3.0 * normal / nn) << anomalous / na << " vs " << normal / nn;
}
