#pragma once

#include <cstddef>

namespace genad::numerics::detail {

/// Row-major matrix view with an explicit row stride (elements between row starts).
struct ConstView {
  const double* data;
  std::size_t rows;
  std::size_t cols;
  std::size_t stride;
};

struct MutView {
  double* data;
  std::size_t rows;
  std::size_t cols;
  std::size_t stride;
};

/// c = alpha * op(a) * op(b) + (accumulate ? c : 0). Extents are those of the views
/// before transposition; callers check compatibility.
void gemm(MutView c, ConstView a, bool trans_a, ConstView b, bool trans_b, double alpha,
          bool accumulate);

/// In-place softmax of one row of n values, shifted by the row maximum.
void softmax_row(double* row, std::size_t n);

}  // namespace genad::numerics::detail
