#include "genad/detect/threshold.hpp"

#include <algorithm>
#include <cmath>

#include "genad/detect/evaluation.hpp"
#include "genad/errors.hpp"

namespace genad::detect {

ErrorHistogram build_histogram(std::span<const double> errors, std::size_t bins) {
  if (errors.empty()) throw ContractError("estimate_gate: no errors");
  if (bins == 0) throw ContractError("estimate_gate: bins must be positive");
  ErrorHistogram h;
  const auto [lo, hi] = std::minmax_element(errors.begin(), errors.end());
  h.min = *lo;
  h.max = *hi;
  h.total = errors.size();
  h.counts.assign(bins, 0);
  h.delta = (h.max - h.min) / static_cast<double>(bins);
  if (h.delta <= 0.0) {
    h.counts[bins - 1] = errors.size();
    return h;
  }
  for (double e : errors) {
    auto b = static_cast<std::size_t>((e - h.min) / h.delta);
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

double histogram_gate(const ErrorHistogram& h, double anomaly_rate) {
  if (!(anomaly_rate >= 0.0 && anomaly_rate < 1.0)) {
    throw ContractError("estimate_gate: a_r + eta must lie in [0, 1), got " + std::to_string(anomaly_rate));
  }
  if (h.total == 0 || h.counts.empty()) throw ContractError("estimate_gate: empty histogram");
  if (h.delta <= 0.0) return h.max;
  const double target = (1.0 - anomaly_rate) * static_cast<double>(h.total);
  const auto needed =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(target - 1e-9)), std::size_t{1}, h.total);
  std::size_t cumulative = 0;
  const std::size_t last = h.counts.size() - 1;
  for (std::size_t b = 0; b < last; ++b) {
    cumulative += h.counts[b];
    if (cumulative >= needed) return h.min + static_cast<double>(b + 1) * h.delta;
  }
  return h.max;
}

double estimate_gate(std::span<const double> errors, double a_r, double eta, std::size_t bins) {
  const double rate = a_r + eta;
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ContractError("estimate_gate: a_r + eta must lie in [0, 1), got " + std::to_string(rate));
  }
  return histogram_gate(build_histogram(errors, bins), rate);
}

std::vector<double> default_eta_grid() {
  std::vector<double> grid;
  for (int k = -10; k <= 10; ++k) grid.push_back(static_cast<double>(k) / 1000.0);
  return grid;
}

ThresholdModel calibrate(const ErrorSeries& validation, std::optional<std::span<const std::uint8_t>> labels, double a_r,
                         std::span<const double> eta_grid, std::size_t bins) {
  if (!(a_r > 0.0 && a_r < 1.0)) throw ContractError("calibrate: a_r must lie in (0, 1)");
  if (validation.length() == 0) throw ContractError("calibrate: empty validation slice");
  const std::size_t n = validation.n_metrics();
  const std::size_t len = validation.length();

  ThresholdModel th;
  th.a_r = a_r;
  for (std::size_t i = 0; i < n; ++i) th.histograms.push_back(build_histogram(validation.errors.row(i), bins));

  auto gates_for = [&](double rate) {
    std::vector<double> gates(n);
    for (std::size_t i = 0; i < n; ++i) gates[i] = histogram_gate(th.histograms[i], rate);
    return gates;
  };

  if (!labels) {
    th.gates = gates_for(a_r);
    return th;
  }
  if (labels->size() != len) {
    throw ShapeError("calibrate: " + std::to_string(labels->size()) + " labels for " + std::to_string(len) +
                     " validation points");
  }

  std::vector<double> etas(eta_grid.begin(), eta_grid.end());
  std::stable_sort(etas.begin(), etas.end(), [](double a, double b) {
    if (std::fabs(a) != std::fabs(b)) return std::fabs(a) < std::fabs(b);
    return a < b;
  });
  const std::size_t max_entity = std::min<std::size_t>(n, 5);
  bool found = false;
  double best_f1 = -1.0;
  std::vector<std::size_t> counts(len);
  std::vector<std::uint8_t> pred(len);
  for (double eta : etas) {
    const double rate = a_r + eta;
    if (rate < 0.0 || rate >= 1.0) continue;
    const std::vector<double> gates = gates_for(rate);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = validation.errors.row(i);
      for (std::size_t t = 0; t < len; ++t) counts[t] += row[t] > gates[i] ? 1 : 0;
    }
    for (std::size_t ge = 1; ge <= max_entity; ++ge) {
      for (std::size_t t = 0; t < len; ++t) pred[t] = counts[t] >= ge ? 1 : 0;
      const double f1 = evaluate(pred, *labels).f1;
      if (f1 > best_f1) {
        best_f1 = f1;
        th.eta = eta;
        th.gate_entity = ge;
        th.gates = gates;
        found = true;
      }
    }
  }
  if (!found) throw ContractError("calibrate: no admissible eta in the grid for a_r = " + std::to_string(a_r));
  th.validation_f1 = best_f1;
  return th;
}

ThresholdModel calibrate(const ErrorSeries& validation, std::optional<std::span<const std::uint8_t>> labels,
                         double a_r) {
  const std::vector<double> grid = default_eta_grid();
  return calibrate(validation, labels, a_r, grid, kDefaultBins);
}

DetectionResult detect_two_level(const ErrorSeries& errors, const ThresholdModel& th) {
  const std::size_t n = errors.n_metrics();
  if (th.gates.size() != n) {
    throw ShapeError("detect: threshold model has " + std::to_string(th.gates.size()) + " gates, errors have " +
                     std::to_string(n) + " metrics");
  }
  if (th.gate_entity < 1 || th.gate_entity > n) throw ContractError("detect: gate_entity must lie in [1, N]");
  const std::size_t len = errors.length();
  DetectionResult r;
  r.n_metrics = n;
  r.metric_flags.assign(n * len, 0);
  r.anomalous_count.assign(len, 0);
  r.entity.assign(len, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = errors.errors.row(i);
    for (std::size_t t = 0; t < len; ++t) {
      if (row[t] > th.gates[i]) {
        r.metric_flags[i * len + t] = 1;
        ++r.anomalous_count[t];
      }
    }
  }
  for (std::size_t t = 0; t < len; ++t) r.entity[t] = r.anomalous_count[t] >= th.gate_entity ? 1 : 0;
  return r;
}

}  // namespace genad::detect
