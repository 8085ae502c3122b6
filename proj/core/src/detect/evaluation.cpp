#include "genad/detect/evaluation.hpp"

#include <string>

#include "genad/errors.hpp"

namespace genad::detect {
namespace {

void check_lengths(std::size_t pred, std::size_t truth, const char* op) {
  if (pred != truth) {
    throw ShapeError(std::string(op) + ": prediction has " + std::to_string(pred) + " points, truth has " +
                     std::to_string(truth));
  }
}

}  // namespace

std::vector<Segment> runs(std::span<const std::uint8_t> truth) {
  std::vector<Segment> out;
  for (std::size_t t = 0; t < truth.size();) {
    if (truth[t] == 0) {
      ++t;
      continue;
    }
    Segment s{t, t, false};
    while (s.end < truth.size() && truth[s.end] != 0) ++s.end;
    t = s.end;
    out.push_back(s);
  }
  return out;
}

std::vector<std::uint8_t> point_adjust(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  check_lengths(pred.size(), truth.size(), "point_adjust");
  std::vector<std::uint8_t> out(pred.begin(), pred.end());
  for (auto& v : out) v = v != 0 ? 1 : 0;
  for (const Segment& s : runs(truth)) {
    bool hit = false;
    for (std::size_t t = s.begin; t < s.end && !hit; ++t) hit = pred[t] != 0;
    if (hit) std::fill(out.begin() + s.begin, out.begin() + s.end, std::uint8_t{1});
  }
  return out;
}

double f1_score(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

EvalReport prf1(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  check_lengths(pred.size(), truth.size(), "prf1");
  EvalReport r;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const bool p = pred[t] != 0;
    const bool y = truth[t] != 0;
    if (p && y) ++r.tp;
    else if (p) ++r.fp;
    else if (y) ++r.fn;
  }
  r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.f1 = f1_score(r.precision, r.recall);
  r.segments = runs(truth);
  for (Segment& s : r.segments) {
    for (std::size_t t = s.begin; t < s.end && !s.detected; ++t) s.detected = pred[t] != 0;
  }
  return r;
}

EvalReport evaluate(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  return prf1(point_adjust(pred, truth), truth);
}

}  // namespace genad::detect
