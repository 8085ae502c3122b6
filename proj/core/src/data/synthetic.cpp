#include "genad/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "genad/data/anomalies.hpp"
#include "genad/errors.hpp"
#include "genad/io.hpp"

namespace genad::data {
namespace {

using nlohmann::json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double waveform_value(Waveform w, double phase) {
  switch (w) {
    case Waveform::Sin:
      return std::sin(phase);
    case Waveform::Cos:
      return std::cos(phase);
    case Waveform::Sawtooth: {
      const double cycles = phase / kTwoPi;
      return 2.0 * (cycles - std::floor(cycles)) - 1.0;
    }
    case Waveform::Square:
      return std::sin(phase) >= 0.0 ? 1.0 : -1.0;
  }
  return 0.0;
}

template <typename E>
E parse_enum(const json& v, const std::string& field,
             std::initializer_list<std::pair<const char*, E>> options) {
  if (!v.is_string()) throw SpecError(field + ": expected a string");
  const auto s = v.get<std::string>();
  for (const auto& [name, value] : options) {
    if (s == name) return value;
  }
  throw SpecError(field + ": unknown value '" + s + "'");
}

Waveform parse_waveform(const json& v, const std::string& field) {
  return parse_enum<Waveform>(v, field,
                              {{"sin", Waveform::Sin}, {"cos", Waveform::Cos},
                               {"sawtooth", Waveform::Sawtooth}, {"square", Waveform::Square}});
}

AnomalyType parse_anomaly_type(const json& v, const std::string& field) {
  return parse_enum<AnomalyType>(v, field,
                                 {{"spike", AnomalyType::Spike},
                                  {"flatline", AnomalyType::Flatline},
                                  {"correlation_break", AnomalyType::CorrelationBreak}});
}

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw SpecError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw SpecError(where + ": unknown field '" + key + "'");
    }
  }
}

template <typename T>
T get_field(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw SpecError(where + "." + key + ": wrong type");
  }
}

std::size_t get_count(const json& obj, const char* key, const std::string& where, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw SpecError(where + "." + key + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

Recipe parse_recipe(const json& obj, const std::string& where) {
  reject_unknown(obj, where, {"target", "op", "inputs", "coeffs"});
  if (!obj.contains("target") || !obj.contains("op") || !obj.contains("inputs")) {
    throw SpecError(where + ": 'target', 'op' and 'inputs' are required");
  }
  Recipe r;
  r.target = get_count(obj, "target", where, 0);
  r.op = parse_enum<RecipeOp>(obj.at("op"), where + ".op",
                              {{"linear", RecipeOp::Linear}, {"relu", RecipeOp::Relu},
                               {"square", RecipeOp::Square}, {"product", RecipeOp::Product}});
  r.inputs = get_field<std::vector<std::size_t>>(obj, "inputs", where, {});
  r.coeffs = get_field<std::vector<double>>(obj, "coeffs", where, {});
  return r;
}

json recipe_to_json(const Recipe& r) {
  return json{{"target", r.target}, {"op", to_string(r.op)}, {"inputs", r.inputs}, {"coeffs", r.coeffs}};
}

}  // namespace

std::string to_string(Waveform w) {
  switch (w) {
    case Waveform::Sin: return "sin";
    case Waveform::Cos: return "cos";
    case Waveform::Sawtooth: return "sawtooth";
    case Waveform::Square: return "square";
  }
  return "?";
}

std::string to_string(RecipeOp op) {
  switch (op) {
    case RecipeOp::Linear: return "linear";
    case RecipeOp::Relu: return "relu";
    case RecipeOp::Square: return "square";
    case RecipeOp::Product: return "product";
  }
  return "?";
}

std::string to_string(RecipeKind kind) {
  switch (kind) {
    case RecipeKind::Linear: return "linear";
    case RecipeKind::NonLinear: return "nonlinear";
    case RecipeKind::HigherOrder: return "higher_order";
  }
  return "?";
}

std::string to_string(AnomalyType type) {
  switch (type) {
    case AnomalyType::Spike: return "spike";
    case AnomalyType::Flatline: return "flatline";
    case AnomalyType::CorrelationBreak: return "correlation_break";
  }
  return "?";
}

RecipeKind recipe_kind(const Recipe& recipe, const std::vector<Recipe>& all) {
  const bool derived_input = std::any_of(recipe.inputs.begin(), recipe.inputs.end(), [&](std::size_t in) {
    return std::any_of(all.begin(), all.end(), [&](const Recipe& r) { return r.target == in; });
  });
  if (derived_input) return RecipeKind::HigherOrder;
  return recipe.op == RecipeOp::Linear ? RecipeKind::Linear : RecipeKind::NonLinear;
}

std::vector<Recipe> default_recipes(std::size_t n_metrics) {
  const std::size_t n_base =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(static_cast<double>(n_metrics) * 4.0 / 9.0)));
  std::vector<Recipe> out;
  for (std::size_t j = 0; n_base + j < n_metrics; ++j) {
    auto base = [&](std::size_t k) { return (j + k) % n_base; };
    Recipe r;
    r.target = n_base + j;
    switch (j % 5) {
      case 0:
        r = {r.target, RecipeOp::Linear, {base(0), base(1)}, {0.5, 0.5}};
        break;
      case 1:
        r = {r.target, RecipeOp::Product, {base(1), base(2)}, {1.0}};
        break;
      case 2:
        r = {r.target, RecipeOp::Relu, {base(2), base(0)}, {1.0, -0.5}};
        break;
      case 3:
        r = {r.target, RecipeOp::Square, {base(3), base(1)}, {0.5, 0.5}};
        break;
      default:
        // Non-linear composition of two earlier derived metrics.
        r = {r.target, RecipeOp::Product, {n_base + j - 4, n_base + j - 1}, {1.0}};
        break;
    }
    out.push_back(std::move(r));
  }
  return out;
}

SyntheticSpec parse_spec(const json& doc) {
  reject_unknown(doc, "spec",
                 {"generator", "n_metrics", "n_points", "seed", "n_entities", "waveforms", "omega_min",
                  "omega_max", "pair_jitter", "noise", "recipes", "anomalies", "start_time", "interval"});
  SyntheticSpec spec;
  if (doc.contains("generator")) {
    spec.generator = parse_enum<Generator>(doc.at("generator"), "spec.generator",
                                           {{"genad", Generator::GenAD}, {"mscred", Generator::Mscred}});
  }
  if (spec.generator == Generator::Mscred) spec.waveforms = {Waveform::Sin, Waveform::Cos};
  spec.n_metrics = get_count(doc, "n_metrics", "spec", spec.n_metrics);
  spec.n_points = get_count(doc, "n_points", "spec", spec.n_points);
  spec.seed = get_field<std::uint64_t>(doc, "seed", "spec", spec.seed);
  spec.n_entities = get_count(doc, "n_entities", "spec", spec.n_entities);
  if (doc.contains("waveforms")) {
    const json& w = doc.at("waveforms");
    if (!w.is_array()) throw SpecError("spec.waveforms: expected an array");
    spec.waveforms.clear();
    for (std::size_t i = 0; i < w.size(); ++i) {
      spec.waveforms.push_back(parse_waveform(w[i], "spec.waveforms[" + std::to_string(i) + "]"));
    }
  }
  spec.omega_min = get_field<double>(doc, "omega_min", "spec", spec.omega_min);
  spec.omega_max = get_field<double>(doc, "omega_max", "spec", spec.omega_max);
  spec.pair_jitter = get_field<double>(doc, "pair_jitter", "spec", spec.pair_jitter);
  spec.noise = get_field<double>(doc, "noise", "spec", spec.noise);
  spec.start_time = get_field<std::int64_t>(doc, "start_time", "spec", spec.start_time);
  spec.interval = get_field<std::int64_t>(doc, "interval", "spec", spec.interval);
  if (doc.contains("recipes")) {
    const json& rs = doc.at("recipes");
    if (!rs.is_array()) throw SpecError("spec.recipes: expected an array");
    for (std::size_t i = 0; i < rs.size(); ++i) {
      spec.recipes.push_back(parse_recipe(rs[i], "spec.recipes[" + std::to_string(i) + "]"));
    }
  }
  if (doc.contains("anomalies")) {
    const json& a = doc.at("anomalies");
    const std::string where = "spec.anomalies";
    reject_unknown(a, where,
                   {"count", "min_duration", "max_duration", "magnitude", "types", "region_start",
                    "region_end", "max_metrics"});
    AnomalyPlan& plan = spec.anomalies;
    plan.count = get_count(a, "count", where, plan.count);
    plan.min_duration = get_count(a, "min_duration", where, plan.min_duration);
    plan.max_duration = get_count(a, "max_duration", where, plan.max_duration);
    plan.magnitude = get_field<double>(a, "magnitude", where, plan.magnitude);
    plan.region_start = get_field<double>(a, "region_start", where, plan.region_start);
    plan.region_end = get_field<double>(a, "region_end", where, plan.region_end);
    plan.max_metrics = get_count(a, "max_metrics", where, plan.max_metrics);
    if (a.contains("types")) {
      const json& ts = a.at("types");
      if (!ts.is_array()) throw SpecError(where + ".types: expected an array");
      plan.types.clear();
      for (std::size_t i = 0; i < ts.size(); ++i) {
        plan.types.push_back(parse_anomaly_type(ts[i], where + ".types[" + std::to_string(i) + "]"));
      }
    }
  }
  validate_spec(spec);
  return spec;
}

SyntheticSpec load_spec(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw SpecError(path.string() + ": invalid JSON: " + e.what());
  } catch (const DataError& e) {
    throw SpecError(e.what());
  }
  return parse_spec(doc);
}

json spec_to_json(const SyntheticSpec& spec) {
  json waveforms = json::array();
  for (Waveform w : spec.waveforms) waveforms.push_back(to_string(w));
  json recipes = json::array();
  for (const Recipe& r : spec.recipes) recipes.push_back(recipe_to_json(r));
  json types = json::array();
  for (AnomalyType t : spec.anomalies.types) types.push_back(to_string(t));
  return json{{"generator", spec.generator == Generator::GenAD ? "genad" : "mscred"},
              {"n_metrics", spec.n_metrics},
              {"n_points", spec.n_points},
              {"seed", spec.seed},
              {"n_entities", spec.n_entities},
              {"waveforms", waveforms},
              {"omega_min", spec.omega_min},
              {"omega_max", spec.omega_max},
              {"pair_jitter", spec.pair_jitter},
              {"noise", spec.noise},
              {"recipes", recipes},
              {"anomalies",
               {{"count", spec.anomalies.count},
                {"min_duration", spec.anomalies.min_duration},
                {"max_duration", spec.anomalies.max_duration},
                {"magnitude", spec.anomalies.magnitude},
                {"types", types},
                {"region_start", spec.anomalies.region_start},
                {"region_end", spec.anomalies.region_end},
                {"max_metrics", spec.anomalies.max_metrics}}},
              {"start_time", spec.start_time},
              {"interval", spec.interval}};
}

void validate_spec(const SyntheticSpec& spec) {
  if (spec.n_metrics < 2) {
    throw SpecError("spec.n_metrics: need at least 2 metrics, got " + std::to_string(spec.n_metrics));
  }
  if (spec.n_points < 1) throw SpecError("spec.n_points: must be positive");
  if (spec.n_entities < 1) throw SpecError("spec.n_entities: must be positive");
  if (spec.waveforms.empty()) throw SpecError("spec.waveforms: at least one family required");
  if (!(spec.omega_min > 0.0) || spec.omega_max < spec.omega_min) {
    throw SpecError("spec.omega_min/omega_max: need 0 < omega_min <= omega_max");
  }
  if (spec.noise < 0.0 || !std::isfinite(spec.noise)) throw SpecError("spec.noise: must be >= 0");
  if (spec.pair_jitter < 0.0 || spec.pair_jitter >= 1.0) throw SpecError("spec.pair_jitter: must lie in [0, 1)");
  if (spec.interval <= 0) throw SpecError("spec.interval: must be positive");
  const AnomalyPlan& a = spec.anomalies;
  if (a.min_duration < 1 || a.max_duration < a.min_duration) {
    throw SpecError("spec.anomalies: need 1 <= min_duration <= max_duration");
  }
  if (!(a.region_start >= 0.0 && a.region_start < a.region_end && a.region_end <= 1.0)) {
    throw SpecError("spec.anomalies: need 0 <= region_start < region_end <= 1");
  }
  if (a.count > 0 && a.types.empty()) throw SpecError("spec.anomalies.types: at least one type required");
  if (a.max_metrics < 1) throw SpecError("spec.anomalies.max_metrics: must be positive");
  if (spec.generator == Generator::Mscred) {
    for (Waveform w : spec.waveforms) {
      if (w != Waveform::Sin && w != Waveform::Cos) {
        throw SpecError("spec.waveforms: the sin/cos generator does not support '" + to_string(w) + "'");
      }
    }
    return;
  }
  std::set<std::size_t> defined;
  std::set<std::size_t> targets;
  for (const Recipe& r : spec.recipes) targets.insert(r.target);
  for (std::size_t i = 0; i < spec.n_metrics; ++i) {
    if (!targets.count(i)) defined.insert(i);
  }
  if (defined.empty()) throw SpecError("spec.recipes: every metric is derived; at least one base metric is needed");
  std::set<std::size_t> seen;
  for (std::size_t k = 0; k < spec.recipes.size(); ++k) {
    const Recipe& r = spec.recipes[k];
    const std::string where = "spec.recipes[" + std::to_string(k) + "]";
    if (r.target >= spec.n_metrics) {
      throw SpecError(where + ".target: metric " + std::to_string(r.target) + " does not exist");
    }
    if (!seen.insert(r.target).second) throw SpecError(where + ".target: metric defined twice");
    if (r.inputs.empty()) throw SpecError(where + ".inputs: at least one input required");
    for (std::size_t in : r.inputs) {
      if (in >= spec.n_metrics || !defined.count(in)) {
        throw SpecError(where + ".inputs: metric " + std::to_string(in) +
                        " does not exist at this point of the recipe graph");
      }
    }
    const std::size_t want = r.op == RecipeOp::Product ? 1 : r.inputs.size();
    if (r.coeffs.size() != want) {
      throw SpecError(where + ".coeffs: expected " + std::to_string(want) + " coefficient(s)");
    }
    defined.insert(r.target);
  }
}

double evaluate_recipe(const Recipe& r, const SeriesFrame& frame, std::size_t t) {
  if (r.op == RecipeOp::Product) {
    double p = r.coeffs[0];
    for (std::size_t in : r.inputs) p *= frame.at(in, t);
    return p;
  }
  double s = 0.0;
  for (std::size_t k = 0; k < r.inputs.size(); ++k) s += r.coeffs[k] * frame.at(r.inputs[k], t);
  switch (r.op) {
    case RecipeOp::Relu: return s > 0.0 ? s : 0.0;
    case RecipeOp::Square: return s * s;
    default: return s;
  }
}

SeriesFrame gen_genad_synthetic(const SyntheticSpec& input) {
  SyntheticSpec spec = input;
  spec.generator = Generator::GenAD;
  if (spec.recipes.empty()) spec.recipes = default_recipes(spec.n_metrics);
  validate_spec(spec);

  SeriesFrame frame = make_frame(spec.n_metrics, spec.n_points, spec.start_time, spec.interval);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> omega_dist(spec.omega_min, spec.omega_max);

  std::set<std::size_t> targets;
  for (const Recipe& r : spec.recipes) targets.insert(r.target);

  json metrics = json::array();
  std::size_t base_index = 0;
  for (std::size_t i = 0; i < spec.n_metrics; ++i) {
    if (targets.count(i)) continue;
    const Waveform family = spec.waveforms[base_index++ % spec.waveforms.size()];
    const double omega = omega_dist(rng);
    std::uniform_int_distribution<std::int64_t> shift(0, static_cast<std::int64_t>(std::ceil(kTwoPi * omega)) - 1);
    const std::int64_t t0 = shift(rng);
    for (std::size_t t = 0; t < spec.n_points; ++t) {
      frame.at(i, t) = waveform_value(family, (static_cast<double>(t) - static_cast<double>(t0)) / omega);
    }
    metrics.push_back({{"metric", i}, {"waveform", to_string(family)}, {"omega", omega}, {"t0", t0}});
  }
  json recipes = json::array();
  for (const Recipe& r : spec.recipes) {
    for (std::size_t t = 0; t < spec.n_points; ++t) frame.at(r.target, t) = evaluate_recipe(r, frame, t);
    json rj = recipe_to_json(r);
    rj["kind"] = to_string(recipe_kind(r, spec.recipes));
    recipes.push_back(std::move(rj));
  }
  if (spec.noise > 0.0) {
    std::normal_distribution<double> gauss(0.0, spec.noise);
    for (double& v : frame.values) v += gauss(rng);
  }
  frame.metadata = {{"generator", "genad"}, {"seed", spec.seed}, {"noise", spec.noise},
                    {"bases", metrics}, {"recipes", recipes}};
  return frame;
}

SeriesFrame gen_mscred_synthetic(const SyntheticSpec& input) {
  SyntheticSpec spec = input;
  spec.generator = Generator::Mscred;
  validate_spec(spec);

  SeriesFrame frame = make_frame(spec.n_metrics, spec.n_points, spec.start_time, spec.interval);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> omega_dist(spec.omega_min, spec.omega_max);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::uniform_int_distribution<std::int64_t> shift(0, 100);

  json metrics = json::array();
  double pair_omega = 0.0;
  for (std::size_t i = 0; i < spec.n_metrics; ++i) {
    if (i % 2 == 0) pair_omega = omega_dist(rng);
    const double omega = pair_omega * (1.0 + spec.pair_jitter * jitter(rng));
    const std::int64_t t0 = shift(rng);
    const Waveform family = spec.waveforms[i % spec.waveforms.size()];
    for (std::size_t t = 0; t < spec.n_points; ++t) {
      frame.at(i, t) = waveform_value(family, (static_cast<double>(t) - static_cast<double>(t0)) / omega);
    }
    metrics.push_back({{"metric", i}, {"waveform", to_string(family)}, {"omega", omega}, {"t0", t0},
                       {"pair", i / 2}});
  }
  if (spec.noise > 0.0) {
    std::normal_distribution<double> gauss(0.0, spec.noise);
    for (double& v : frame.values) v += gauss(rng);
  }
  frame.metadata = {{"generator", "mscred"}, {"seed", spec.seed}, {"noise", spec.noise},
                    {"bases", metrics}, {"recipes", json::array()}};
  return frame;
}

std::uint64_t entity_seed(std::uint64_t base_seed, std::size_t index) {
  // splitmix64 finalizer over (seed, index)
  std::uint64_t z = base_seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<SeriesFrame> generate_fleet(const SyntheticSpec& spec) {
  validate_spec(spec);
  std::vector<SeriesFrame> fleet;
  fleet.reserve(spec.n_entities);
  for (std::size_t e = 0; e < spec.n_entities; ++e) {
    SyntheticSpec entity = spec;
    entity.seed = entity_seed(spec.seed, e);
    SeriesFrame frame = spec.generator == Generator::GenAD ? gen_genad_synthetic(entity)
                                                           : gen_mscred_synthetic(entity);
    frame = inject_anomalies(frame, spec.anomalies, entity_seed(entity.seed, 0xA11));
    frame.metadata["entity"] = e;
    fleet.push_back(std::move(frame));
  }
  return fleet;
}

}  // namespace genad::data
