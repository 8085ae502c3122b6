#include "genad/data/windows.hpp"

#include <algorithm>

#include "genad/errors.hpp"

namespace genad::data {

std::size_t window_count(std::size_t length, std::size_t t_e, std::size_t stride) {
  if (t_e == 0 || stride == 0) throw ContractError("window length and stride must be positive");
  const std::size_t span = kSegments * t_e;
  if (length < span) return 0;
  return (length - span) / stride + 1;
}

WindowSample make_window(const SeriesFrame& frame, std::size_t origin, std::size_t t_e) {
  if (t_e == 0) throw ContractError("segment length must be positive");
  if (origin + kSegments * t_e > frame.length()) {
    throw DataError("window at " + std::to_string(origin) + " of length " +
                    std::to_string(kSegments * t_e) + " does not fit a series of length " +
                    std::to_string(frame.length()));
  }
  WindowSample w;
  w.origin = origin;
  w.t_e = t_e;
  const std::size_t n = frame.n_metrics();
  for (std::size_t s = 0; s < kSegments; ++s) {
    numerics::Tensor seg({n, t_e});
    for (std::size_t i = 0; i < n; ++i) {
      auto m = frame.metric(i).subspan(origin + s * t_e, t_e);
      std::copy(m.begin(), m.end(), seg.row(i).begin());
    }
    w.segments[s] = std::move(seg);
  }
  return w;
}

std::vector<WindowSample> make_windows(const SeriesFrame& frame, std::size_t t_e, std::size_t stride) {
  const std::size_t count = window_count(frame.length(), t_e, stride);
  if (count == 0) {
    throw DataError("series too short: " + std::to_string(frame.length()) +
                    " points, need at least " + std::to_string(kSegments * t_e));
  }
  std::vector<WindowSample> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) out.push_back(make_window(frame, w * stride, t_e));
  return out;
}

}  // namespace genad::data
