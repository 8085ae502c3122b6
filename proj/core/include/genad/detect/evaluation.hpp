#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace genad::detect {

/// Maximal run of truth 1s, [begin, end).
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool detected = false;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct EvalReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<Segment> segments;
};

/// Maximal runs of 1s.
std::vector<Segment> runs(std::span<const std::uint8_t> truth);

/// Marks every truth run that holds at least one prediction as fully predicted.
/// Throws ShapeError on a length mismatch.
std::vector<std::uint8_t> point_adjust(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);

/// Pointwise counts and scores; zero denominators give 0.
EvalReport prf1(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);

/// 2PR / (P + R), or 0 when P + R = 0.
double f1_score(double precision, double recall);

/// point_adjust followed by prf1.
EvalReport evaluate(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);

}  // namespace genad::detect
