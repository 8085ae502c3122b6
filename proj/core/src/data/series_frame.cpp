#include "genad/data/series_frame.hpp"

#include <cmath>
#include <cstdio>

#include "genad/errors.hpp"

namespace genad::data {

SeriesFrame SeriesFrame::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > length()) {
    throw ContractError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                        ") outside a frame of length " + std::to_string(length()));
  }
  SeriesFrame out;
  out.metric_names = metric_names;
  out.metadata = metadata;
  out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                        timestamps.begin() + static_cast<std::ptrdiff_t>(end));
  out.values.reserve(n_metrics() * (end - begin));
  for (std::size_t i = 0; i < n_metrics(); ++i) {
    auto m = metric(i);
    out.values.insert(out.values.end(), m.begin() + static_cast<std::ptrdiff_t>(begin),
                      m.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (labels) {
    out.labels.emplace(labels->begin() + static_cast<std::ptrdiff_t>(begin),
                       labels->begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

void SeriesFrame::validate() const {
  if (n_metrics() < 2) throw DataError("a frame needs at least 2 metrics, got " + std::to_string(n_metrics()));
  if (length() < 1) throw DataError("a frame needs at least one point");
  if (values.size() != n_metrics() * length()) throw DataError("value matrix does not match N x T");
  if (labels && labels->size() != length()) throw DataError("label sequence does not match T");
  if (length() >= 2) {
    const std::int64_t step = timestamps[1] - timestamps[0];
    if (step <= 0) throw DataError("timestamps must be strictly increasing");
    for (std::size_t t = 2; t < length(); ++t) {
      if (timestamps[t] - timestamps[t - 1] != step) {
        throw DataError("non-constant timestamp spacing at point " + std::to_string(t));
      }
    }
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError("non-finite value in metric '" + metric_names[i / length()] + "'");
    }
  }
  if (labels) {
    for (auto l : *labels) {
      if (l > 1) throw DataError("labels must be 0 or 1");
    }
  }
}

SeriesFrame make_frame(std::size_t n_metrics, std::size_t length, std::int64_t start,
                       std::int64_t step) {
  SeriesFrame f;
  for (std::size_t i = 0; i < n_metrics; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "m%02zu", i);
    f.metric_names.emplace_back(name);
  }
  f.timestamps.resize(length);
  for (std::size_t t = 0; t < length; ++t) f.timestamps[t] = start + static_cast<std::int64_t>(t) * step;
  f.values.assign(n_metrics * length, 0.0);
  return f;
}

}  // namespace genad::data
