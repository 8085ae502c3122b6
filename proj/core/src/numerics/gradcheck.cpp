#include "genad/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "genad/errors.hpp"

namespace genad::numerics {
namespace {

double evaluate(const DiffGraph& graph, const ParameterSet& params) {
  Tape tape;
  BoundParameters bound(tape, params);
  return graph.loss(tape, bound).value().item();
}

std::vector<std::size_t> pick_indices(std::size_t size, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> all(size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (count >= size) return all;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, size - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

GradCheckResult grad_check(const DiffGraph& graph, const GradCheckOptions& options) {
  if (options.epsilon < 1e-7 || options.epsilon > 1e-3) {
    throw ContractError("grad_check: epsilon must lie in [1e-7, 1e-3]");
  }
  if (!graph.loss) throw ContractError("grad_check: graph has no loss function");

  ParameterSet analytic;
  {
    Tape tape;
    BoundParameters bound(tape, graph.parameters);
    Var loss = graph.loss(tape, bound);
    if (loss.value().size() != 1) {
      throw ContractError("grad_check: loss must be scalar, got shape " +
                          shape_string(loss.value().shape()));
    }
    tape.backward(loss);
    analytic = bound.gradients();
  }

  const std::size_t total = parameter_count(graph.parameters);
  std::mt19937_64 rng(options.seed);
  ParameterSet probe = graph.parameters;
  GradCheckResult result;
  for (const auto& [name, value] : graph.parameters) {
    std::size_t count = value.size();
    if (total > options.max_elements) {
      const double share = static_cast<double>(options.max_elements) * static_cast<double>(value.size()) /
                           static_cast<double>(total);
      count = std::min(value.size(), std::max<std::size_t>(4, static_cast<std::size_t>(std::ceil(share))));
    }
    Tensor& p = probe.at(name);
    for (std::size_t idx : pick_indices(value.size(), count, rng)) {
      const double original = p[idx];
      p[idx] = original + options.epsilon;
      const double up = evaluate(graph, probe);
      p[idx] = original - options.epsilon;
      const double down = evaluate(graph, probe);
      p[idx] = original;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double a = analytic.at(name)[idx] * (1.0 + options.corrupt_gradient);
      const double denom = std::max({std::fabs(a), std::fabs(numeric), options.denominator_floor});
      const double rel = std::fabs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_relative_error || result.checked == 1) {
        result.max_relative_error = rel;
        result.worst_parameter = name;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace genad::numerics
