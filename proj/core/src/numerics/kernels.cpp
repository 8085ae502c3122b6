#include "kernels.hpp"

#include <Eigen/Core>

namespace genad::numerics::detail {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Stride = Eigen::OuterStride<>;
using ConstMap = Eigen::Map<const RowMat, 0, Stride>;
using MutMap = Eigen::Map<RowMat, 0, Stride>;

ConstMap as_map(ConstView v) {
  return ConstMap(v.data, static_cast<Eigen::Index>(v.rows), static_cast<Eigen::Index>(v.cols),
                  Stride(static_cast<Eigen::Index>(v.stride)));
}

template <typename Lhs, typename Rhs>
void assign(MutMap& out, const Lhs& lhs, const Rhs& rhs, double alpha, bool accumulate) {
  if (accumulate) {
    out.noalias() += alpha * (lhs * rhs);
  } else {
    out.noalias() = alpha * (lhs * rhs);
  }
}

}  // namespace

void gemm(MutView c, ConstView a, bool trans_a, ConstView b, bool trans_b, double alpha,
          bool accumulate) {
  MutMap out(c.data, static_cast<Eigen::Index>(c.rows), static_cast<Eigen::Index>(c.cols),
             Stride(static_cast<Eigen::Index>(c.stride)));
  const ConstMap lhs = as_map(a);
  const ConstMap rhs = as_map(b);
  if (!trans_a && !trans_b) {
    assign(out, lhs, rhs, alpha, accumulate);
  } else if (!trans_a && trans_b) {
    assign(out, lhs, rhs.transpose(), alpha, accumulate);
  } else if (trans_a && !trans_b) {
    assign(out, lhs.transpose(), rhs, alpha, accumulate);
  } else {
    assign(out, lhs.transpose(), rhs.transpose(), alpha, accumulate);
  }
}

void softmax_row(double* row, std::size_t n) {
  Eigen::Map<Eigen::ArrayXd> r(row, static_cast<Eigen::Index>(n));
  r = (r - r.maxCoeff()).exp();
  r *= 1.0 / r.sum();
}

}  // namespace genad::numerics::detail
