#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "genad/data/series_frame.hpp"
#include "json.hpp"

namespace genad::data {

enum class Waveform { Sin, Cos, Sawtooth, Square };

/// Operation a derived metric applies to its inputs `x_k` with coefficients `c_k`:
/// linear  sum c_k x_k;  relu  max(0, sum c_k x_k);  square  (sum c_k x_k)^2;
/// product  c_0 * prod x_k.
enum class RecipeOp { Linear, Relu, Square, Product };

/// linear: a linear op over base metrics; nonlinear: any other op over base
/// metrics; higher_order: any op with at least one derived input.
enum class RecipeKind { Linear, NonLinear, HigherOrder };

struct Recipe {
  std::size_t target = 0;
  RecipeOp op = RecipeOp::Linear;
  std::vector<std::size_t> inputs;
  std::vector<double> coeffs;
};

enum class AnomalyType { Spike, Flatline, CorrelationBreak };

/// Requested anomalies; placement is drawn from a seed (see anomalies.hpp).
struct AnomalyPlan {
  std::size_t count = 10;
  std::size_t min_duration = 5;
  std::size_t max_duration = 20;
  /// Spike height as a fraction of the metric's range over the frame.
  double magnitude = 0.8;
  std::vector<AnomalyType> types{AnomalyType::Spike, AnomalyType::Flatline,
                                 AnomalyType::CorrelationBreak};
  /// Placement region as fractions of the series length.
  double region_start = 0.4;
  double region_end = 1.0;
  /// Spikes and flatlines touch between 1 and this many metrics.
  std::size_t max_metrics = 3;
};

enum class Generator { GenAD, Mscred };

struct SyntheticSpec {
  Generator generator = Generator::GenAD;
  std::size_t n_metrics = 18;
  std::size_t n_points = 4800;
  std::uint64_t seed = 0;
  /// Number of entities written by fleet generation.
  std::size_t n_entities = 32;
  /// Families assigned cyclically to base metrics.
  std::vector<Waveform> waveforms{Waveform::Sin, Waveform::Cos, Waveform::Sawtooth, Waveform::Square};
  /// Time scale omega of each waveform f((t - t0) / omega) is drawn from this range.
  double omega_min = 5.0;
  double omega_max = 25.0;
  /// Relative spread of omega inside a correlated pair (sin/cos generator only).
  double pair_jitter = 0.02;
  /// Standard deviation of the Gaussian noise added last to every metric.
  double noise = 0.02;
  /// Empty means default_recipes(n_metrics).
  std::vector<Recipe> recipes;
  AnomalyPlan anomalies;
  std::int64_t start_time = 1'600'000'000;
  std::int64_t interval = 900;
};

std::string to_string(Waveform w);
std::string to_string(RecipeOp op);
std::string to_string(RecipeKind kind);
std::string to_string(AnomalyType type);

RecipeKind recipe_kind(const Recipe& recipe, const std::vector<Recipe>& all);

/// Recipe graph used when a spec lists none: roughly 4/9 of the metrics are
/// bases and the rest cycle through linear, product, relu, square and
/// higher-order recipes.
std::vector<Recipe> default_recipes(std::size_t n_metrics);

/// Parses a JSON spec. Unknown keys are rejected with SpecError naming the field.
SyntheticSpec parse_spec(const nlohmann::json& doc);
SyntheticSpec load_spec(const std::filesystem::path& path);
nlohmann::json spec_to_json(const SyntheticSpec& spec);

/// Checks ranges and the recipe graph; throws SpecError.
void validate_spec(const SyntheticSpec& spec);

/// Sin/cos metrics in correlated pairs with shared time scales, integer phase
/// delays and additive noise. Waveforms other than sin/cos are rejected.
SeriesFrame gen_mscred_synthetic(const SyntheticSpec& spec);

/// Base metrics from the four waveform families, derived metrics from the
/// recipe graph, then noise. Recipes and per-metric parameters are recorded in
/// the frame metadata.
SeriesFrame gen_genad_synthetic(const SyntheticSpec& spec);

/// Seed of fleet entity `index`, derived from the spec seed.
std::uint64_t entity_seed(std::uint64_t base_seed, std::size_t index);

/// One frame per entity (spec.n_entities), each with the spec's anomaly plan
/// injected and labelled.
std::vector<SeriesFrame> generate_fleet(const SyntheticSpec& spec);

/// Evaluates a recipe on the frame's current values at point t.
double evaluate_recipe(const Recipe& recipe, const SeriesFrame& frame, std::size_t t);

}  // namespace genad::data
