#include "genad/data/anomalies.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "genad/errors.hpp"

namespace genad::data {
namespace {

std::vector<std::size_t> derived_metrics(const SeriesFrame& frame) {
  std::vector<std::size_t> out;
  if (!frame.metadata.contains("recipes")) return out;
  for (const auto& r : frame.metadata.at("recipes")) {
    const std::size_t target = r.at("target").get<std::size_t>();
    if (target < frame.n_metrics()) out.push_back(target);
  }
  return out;
}

std::vector<std::size_t> pick_distinct(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

std::vector<AnomalyEvent> draw_anomaly_events(const AnomalyPlan& plan, const SeriesFrame& frame,
                                              std::uint64_t seed) {
  std::vector<AnomalyEvent> events;
  if (plan.count == 0) return events;
  const std::size_t t_len = frame.length();
  if (plan.max_duration > t_len) {
    throw PlanError("requested anomaly duration " + std::to_string(plan.max_duration) +
                    " is longer than the frame (" + std::to_string(t_len) + " points)");
  }
  if (plan.types.empty()) throw PlanError("anomaly plan lists no types");
  const auto lo = static_cast<std::size_t>(std::floor(plan.region_start * static_cast<double>(t_len)));
  const auto hi = static_cast<std::size_t>(std::floor(plan.region_end * static_cast<double>(t_len)));
  if (hi <= lo || hi - lo < plan.max_duration) {
    throw PlanError("anomaly region [" + std::to_string(lo) + ", " + std::to_string(hi) +
                    ") cannot hold a " + std::to_string(plan.max_duration) + "-point anomaly");
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> duration(plan.min_duration, plan.max_duration);
  std::uniform_int_distribution<std::size_t> type_pick(0, plan.types.size() - 1);
  const std::vector<std::size_t> derived = derived_metrics(frame);
  const std::size_t n = frame.n_metrics();

  constexpr int kMaxAttempts = 10000;
  for (std::size_t e = 0; e < plan.count; ++e) {
    AnomalyEvent ev;
    int attempt = 0;
    while (true) {
      if (++attempt > kMaxAttempts) {
        throw PlanError("cannot place " + std::to_string(plan.count) + " disjoint anomalies in region [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + ")");
      }
      ev.length = duration(rng);
      std::uniform_int_distribution<std::size_t> start(lo, hi - ev.length);
      ev.start = start(rng);
      const bool collides = std::any_of(events.begin(), events.end(), [&](const AnomalyEvent& o) {
        return ev.start <= o.start + o.length && o.start <= ev.start + ev.length;
      });
      if (!collides) break;
    }
    ev.type = plan.types[type_pick(rng)];
    ev.magnitude = plan.magnitude;
    if (ev.type == AnomalyType::CorrelationBreak) {
      if (derived.empty()) {
        std::uniform_int_distribution<std::size_t> m(0, n - 1);
        ev.metrics = {m(rng)};
      } else {
        std::uniform_int_distribution<std::size_t> m(0, derived.size() - 1);
        ev.metrics = {derived[m(rng)]};
      }
    } else {
      std::uniform_int_distribution<std::size_t> k(1, std::min(plan.max_metrics, n));
      ev.metrics = pick_distinct(n, k(rng), rng);
    }
    events.push_back(std::move(ev));
  }
  std::sort(events.begin(), events.end(),
            [](const AnomalyEvent& a, const AnomalyEvent& b) { return a.start < b.start; });
  return events;
}

SeriesFrame inject_anomalies(const SeriesFrame& frame, std::span<const AnomalyEvent> events,
                             std::uint64_t seed) {
  SeriesFrame out = frame;
  if (!out.labels) out.labels.emplace(out.length(), 0);
  if (!out.metadata.contains("anomalies")) out.metadata["anomalies"] = nlohmann::json::array();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> omega_dist(3.0, 10.0);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);

  for (const AnomalyEvent& ev : events) {
    if (ev.length == 0 || ev.start + ev.length > out.length()) {
      throw PlanError("anomaly [" + std::to_string(ev.start) + ", " + std::to_string(ev.start + ev.length) +
                      ") does not fit a frame of " + std::to_string(out.length()) + " points");
    }
    if (ev.metrics.empty()) throw PlanError("anomaly touches no metric");
    for (std::size_t m : ev.metrics) {
      if (m >= out.n_metrics()) throw PlanError("anomaly references metric " + std::to_string(m) + " out of range");
      auto original = frame.metric(m);
      const auto [lo, hi] = std::minmax_element(original.begin(), original.end());
      const double range = *hi - *lo > 0.0 ? *hi - *lo : 1.0;
      auto values = out.metric(m);
      switch (ev.type) {
        case AnomalyType::Spike:
          for (std::size_t t = ev.start; t < ev.start + ev.length; ++t) values[t] += ev.magnitude * range;
          break;
        case AnomalyType::Flatline: {
          const double hold = values[ev.start == 0 ? 0 : ev.start - 1];
          for (std::size_t t = ev.start; t < ev.start + ev.length; ++t) values[t] = hold;
          break;
        }
        case AnomalyType::CorrelationBreak: {
          double mean = 0.0;
          for (std::size_t t = ev.start; t < ev.start + ev.length; ++t) mean += values[t];
          mean /= static_cast<double>(ev.length);
          const double omega = omega_dist(rng);
          const double phase = phase_dist(rng);
          for (std::size_t t = ev.start; t < ev.start + ev.length; ++t) {
            values[t] = mean + 0.5 * range * std::sin(static_cast<double>(t - ev.start) / omega + phase);
          }
          break;
        }
      }
    }
    for (std::size_t t = ev.start; t < ev.start + ev.length; ++t) (*out.labels)[t] = 1;
    out.metadata["anomalies"].push_back({{"start", ev.start},
                                         {"length", ev.length},
                                         {"type", to_string(ev.type)},
                                         {"metrics", ev.metrics},
                                         {"magnitude", ev.magnitude}});
  }
  return out;
}

SeriesFrame inject_anomalies(const SeriesFrame& frame, const AnomalyPlan& plan, std::uint64_t seed) {
  const auto events = draw_anomaly_events(plan, frame, seed);
  return inject_anomalies(frame, events, entity_seed(seed, 1));
}

}  // namespace genad::data
