#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "genad/numerics/tape.hpp"
#include "genad/numerics/tensor.hpp"

namespace genad::numerics {

// Plain tensor kernels.

/// Row-wise softmax with max subtraction; every row sums to one.
Tensor softmax_rows(const Tensor& t);

/// softmax_rows(q * k^T / sqrt(d)) * v for q: m x d, k: n x d, v: n x dv.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t d);

/// Mean over elements of log(cosh(pred - target)), in overflow-safe form.
double log_cosh_loss(const Tensor& pred, const Tensor& target);

/// Elementwise log(cosh(x)) = |x| + log((1 + exp(-2|x|)) / 2).
double log_cosh(double x);

Tensor matmul(const Tensor& a, const Tensor& b);

// Differentiable operations recorded on the tape that owns their inputs. All are
// rank-2 unless stated otherwise.

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Adds a 1 x n row to every row of an m x n matrix.
Var add_row(Var a, Var row);
/// x * w + b with w: in x out and b: 1 x out.
Var linear(Var x, Var w, Var b);
Var relu(Var a);
Var softmax_rows(Var a);
/// Per-row normalization to zero mean and unit variance, then gamma * x + beta
/// with gamma, beta of shape 1 x n.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
/// Mean log-cosh between equal-shape tensors, as a 1 x 1 value.
Var log_cosh_loss(Var pred, Var target);
/// Sum of all elements, as a 1 x 1 value.
Var sum(Var a);
Var transpose(Var a);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
/// out.row(i) = a.row(index[i]). Repeated indices accumulate in the gradient.
Var gather_rows(Var a, std::span<const std::size_t> index);
/// Elementwise product with a constant mask (inverted-dropout scaling is the caller's).
Var mask_multiply(Var a, const Tensor& mask);

/// scaled_dot_attention composed from recorded primitives.
Var scaled_dot_attention(Var q, Var k, Var v, std::size_t d);

}  // namespace genad::numerics
