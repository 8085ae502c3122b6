#include "genad/detect/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "genad/data/normalize.hpp"
#include "genad/data/windows.hpp"
#include "genad/errors.hpp"

namespace genad::detect {
namespace {

// Windows per forward pass while scoring.
constexpr std::size_t kScoreChunk = 8;

}  // namespace

ErrorSeries ErrorSeries::slice(std::size_t begin, std::size_t end) const {
  const std::size_t lo = std::clamp(begin, offset, offset + length()) - offset;
  const std::size_t hi = std::clamp(end, offset + lo, offset + length()) - offset;
  ErrorSeries out;
  out.metric_names = metric_names;
  out.offset = offset + lo;
  out.timestamps.assign(timestamps.begin() + lo, timestamps.begin() + hi);
  if (hi > lo) {
    out.errors = numerics::Tensor({n_metrics(), hi - lo});
    for (std::size_t i = 0; i < n_metrics(); ++i) {
      auto src = errors.row(i);
      std::copy(src.begin() + lo, src.begin() + hi, out.errors.row(i).begin());
    }
  }
  return out;
}

ErrorSeries score(const data::SeriesFrame& frame, const model::GenADModel& model) {
  const model::ModelConfig& c = model.config();
  if (frame.n_metrics() != c.n_metrics) {
    throw DataError("frame has " + std::to_string(frame.n_metrics()) + " metrics, model expects " +
                    std::to_string(c.n_metrics));
  }
  const std::size_t t_e = c.t_e;
  const std::size_t window = data::kSegments * t_e;
  const std::size_t len = frame.length();
  if (len < window) {
    throw DataError("series too short: " + std::to_string(len) + " points, need at least " + std::to_string(window));
  }
  std::vector<std::size_t> origins;
  for (std::size_t o = 0; o + window <= len; o += t_e) origins.push_back(o);
  if (origins.back() + window < len) origins.push_back(len - window);

  const std::size_t first = window - t_e;
  ErrorSeries out;
  out.metric_names = frame.metric_names;
  out.offset = first;
  out.timestamps.assign(frame.timestamps.begin() + static_cast<std::ptrdiff_t>(first), frame.timestamps.end());
  out.errors = numerics::Tensor({c.n_metrics, len - first});

  const std::vector<model::MaskPlan> groups =
      model::inference_plans(c.n_metrics, model::masked_count(c.n_metrics, c.mask_ratio));
  for (std::size_t start = 0; start < origins.size(); start += kScoreChunk) {
    const std::size_t stop = std::min(origins.size(), start + kScoreChunk);
    std::vector<data::WindowSample> windows;
    std::vector<model::MaskPlan> plans;
    for (std::size_t w = start; w < stop; ++w) {
      data::WindowSample sample = data::make_window(frame, origins[w], t_e);
      for (const auto& g : groups) {
        windows.push_back(sample);
        plans.push_back(g);
      }
    }
    numerics::Tape tape;
    numerics::BoundParameters bound(tape, model.parameters(), false);
    const numerics::Tensor& recon = model::forward_batch(bound, model, windows, plans).value();
    for (std::size_t b = 0; b < windows.size(); ++b) {
      const std::size_t target_begin = windows[b].origin + first;
      // The tail window only fills points not covered by its predecessor.
      const std::size_t covered = (start + b / groups.size()) == 0 ? first
                                  : origins[start + b / groups.size() - 1] + window;
      for (std::size_t i : plans[b].masked) {
        for (std::size_t t = 0; t < t_e; ++t) {
          const std::size_t point = target_begin + t;
          if (point < covered) continue;
          out.errors(i, point - first) =
              std::fabs(windows[b].target()(i, t) - recon(b * c.n_metrics + i, t));
        }
      }
    }
  }
  return out;
}

ErrorSeries score(const data::SeriesFrame& frame, const train::Checkpoint& ckpt) {
  if (ckpt.stats.min.size() != frame.n_metrics()) {
    throw DataError("frame has " + std::to_string(frame.n_metrics()) + " metrics, checkpoint expects " +
                    std::to_string(ckpt.stats.min.size()));
  }
  return score(data::apply_normalization(frame, ckpt.stats), ckpt.model);
}

}  // namespace genad::detect
