#include "genad/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "kernels.hpp"
#include "genad/errors.hpp"

namespace genad::numerics {
namespace {

using detail::ConstView;
using detail::gemm;
using detail::MutView;

ConstView view(const Tensor& t) { return {t.data(), t.rows(), t.cols(), t.cols()}; }
MutView mut_view(Tensor& t) { return {t.data(), t.rows(), t.cols(), t.cols()}; }

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape) throw ContractError(std::string(op) + ": operands live on different tapes");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void softmax_rows_inplace(Tensor& t) {
  const std::size_t rows = t.rows();
  const std::size_t cols = t.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    detail::softmax_row(t.data() + r * cols, cols);
  }
}

// grad_in = p * (grad_out - rowsum(grad_out * p))
Tensor softmax_backward(const Tensor& p, const Tensor& g) {
  Tensor out(p.shape());
  const std::size_t rows = p.rows();
  const std::size_t cols = p.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* pr = p.data() + r * cols;
    const double* gr = g.data() + r * cols;
    double dot = 0.0;
    for (std::size_t c = 0; c < cols; ++c) dot += pr[c] * gr[c];
    double* o = out.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) o[c] = pr[c] * (gr[c] - dot);
  }
  return out;
}

}  // namespace

double log_cosh(double x) {
  const double a = std::fabs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

Tensor softmax_rows(const Tensor& t) {
  require_rank2(t, "softmax_rows");
  Tensor out = t;
  softmax_rows_inplace(out);
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner extents differ " + shape_string(a.shape()) + " * " +
                     shape_string(b.shape()));
  }
  Tensor out({a.rows(), b.cols()});
  gemm(mut_view(out), view(a), false, view(b), false, 1.0, false);
  return out;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t d) {
  require_rank2(q, "scaled_dot_attention");
  require_rank2(k, "scaled_dot_attention");
  require_rank2(v, "scaled_dot_attention");
  if (d == 0) throw ContractError("scaled_dot_attention: d must be positive");
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw ShapeError("scaled_dot_attention: incompatible extents Q" + shape_string(q.shape()) +
                     " K" + shape_string(k.shape()) + " V" + shape_string(v.shape()));
  }
  Tensor scores({q.rows(), k.rows()});
  gemm(mut_view(scores), view(q), false, view(k), true, 1.0 / std::sqrt(static_cast<double>(d)),
       false);
  softmax_rows_inplace(scores);
  return matmul(scores, v);
}

double log_cosh_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "log_cosh_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += log_cosh(pred[i] - target[i]);
  return total / static_cast<double>(pred.size());
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  Tensor out = matmul(a.value(), b.value());
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      gemm(mut_view(ga), view(g), false, view(t.value(ib)), true, 1.0, true);
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      gemm(mut_view(gb), view(t.value(ia)), true, view(g), false, 1.0, true);
    }
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b, "matmul_nt");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, "matmul_nt");
  require_rank2(bv, "matmul_nt");
  if (av.cols() != bv.cols()) {
    throw ShapeError("matmul_nt: inner extents differ " + shape_string(av.shape()) + " * " +
                     shape_string(bv.shape()) + "^T");
  }
  Tensor out({av.rows(), bv.rows()});
  gemm(mut_view(out), view(av), false, view(bv), true, 1.0, false);
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      gemm(mut_view(t.grad_buffer(ia)), view(g), false, view(t.value(ib)), false, 1.0, true);
    }
    if (t.needs_grad(ib)) {
      gemm(mut_view(t.grad_buffer(ib)), view(g), true, view(t.value(ia)), false, 1.0, true);
    }
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor g = t.grad(self);
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    Tensor g = t.grad(self);
    t.accumulate(ia, g);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = -g[i];
    t.accumulate(ib, g);
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      const Tensor& bv = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      const Tensor& av = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& x : out.values()) x *= factor;
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var add_row(Var a, Var row) {
  require_same_tape(a, row, "add_row");
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require_rank2(av, "add_row");
  require_rank2(rv, "add_row");
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row: row " + shape_string(rv.shape()) + " does not broadcast over " +
                     shape_string(av.shape()));
  }
  Tensor out = av;
  const std::size_t cols = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double* o = out.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) o[c] += rv[c];
  }
  const std::size_t ia = a.id, ir = row.id;
  return a.tape->record(std::move(out), {ia, ir}, [ia, ir](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    t.accumulate(ia, g);
    if (t.needs_grad(ir)) {
      Tensor& gr = t.grad_buffer(ir);
      const std::size_t cols = g.cols();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const double* gp = g.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gr[c] += gp[c];
      }
    }
  });
}

Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

Var relu(Var a) {
  Tensor out = a.value();
  for (double& x : out.values()) x = x > 0.0 ? x : 0.0;
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (y[i] > 0.0) ga[i] += g[i];
    }
  });
}

Var softmax_rows(Var a) {
  Tensor out = softmax_rows(a.value());
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    t.accumulate(ia, softmax_backward(t.value(self), t.grad(self)));
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  require_same_tape(x, gamma, "layer_norm");
  require_same_tape(x, beta, "layer_norm");
  const Tensor& xv = x.value();
  require_rank2(xv, "layer_norm");
  const std::size_t rows = xv.rows();
  const std::size_t cols = xv.cols();
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  if (gv.shape() != std::vector<std::size_t>{1, cols} || !gv.same_shape(bv)) {
    throw ShapeError("layer_norm: gamma/beta must be 1x" + std::to_string(cols));
  }
  // Normalized values and per-row inverse deviations are kept for the backward pass.
  auto xhat = std::make_shared<Tensor>(xv.shape());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out(xv.shape());
  const double n = static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += xr[c];
    mean /= n;
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    double* hr = xhat->data() + r * cols;
    double* orow = out.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      hr[c] = (xr[c] - mean) * is;
      orow[c] = gv[c] * hr[c] + bv[c];
    }
  }
  const std::size_t ix = x.id, ig = gamma.id, ib = beta.id;
  return x.tape->record(
      std::move(out), {ix, ig, ib}, [ix, ig, ib, xhat, inv_std](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& gv = t.value(ig);
        const std::size_t rows = g.rows();
        const std::size_t cols = g.cols();
        const double n = static_cast<double>(cols);
        if (t.needs_grad(ig) || t.needs_grad(ib)) {
          Tensor& gg = t.grad_buffer(ig);
          Tensor& gb = t.grad_buffer(ib);
          for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = g.data() + r * cols;
            const double* hr = xhat->data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) {
              gg[c] += gr[c] * hr[c];
              gb[c] += gr[c];
            }
          }
        }
        if (t.needs_grad(ix)) {
          Tensor& gx = t.grad_buffer(ix);
          std::vector<double> dh(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = g.data() + r * cols;
            const double* hr = xhat->data() + r * cols;
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              dh[c] = gr[c] * gv[c];
              mean_dh += dh[c];
              mean_dh_h += dh[c] * hr[c];
            }
            mean_dh /= n;
            mean_dh_h /= n;
            double* xr = gx.data() + r * cols;
            const double is = (*inv_std)[r];
            for (std::size_t c = 0; c < cols; ++c) {
              xr[c] += is * (dh[c] - mean_dh - hr[c] * mean_dh_h);
            }
          }
        }
      });
}

Var log_cosh_loss(Var pred, Var target) {
  require_same_tape(pred, target, "log_cosh_loss");
  const double value = log_cosh_loss(pred.value(), target.value());
  const std::size_t ip = pred.id, it = target.id;
  return pred.tape->record(Tensor::scalar(value), {ip, it}, [ip, it](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    const Tensor& pv = t.value(ip);
    const Tensor& tv = t.value(it);
    const double s = g / static_cast<double>(pv.size());
    Tensor d(pv.shape());
    for (std::size_t i = 0; i < pv.size(); ++i) d[i] = s * std::tanh(pv[i] - tv[i]);
    t.accumulate(ip, d);
    if (t.needs_grad(it)) {
      for (double& x : d.values()) x = -x;
      t.accumulate(it, d);
    }
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double x : a.value().values()) total += x;
  const std::size_t ia = a.id;
  return a.tape->record(Tensor::scalar(total), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& ga = t.grad_buffer(ia);
    for (double& x : ga.values()) x += g;
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_rank2(av, "transpose");
  Tensor out({av.cols(), av.rows()});
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(c, r) = av(r, c);
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_rank2(av, "slice_rows");
  if (begin >= end || end > av.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + shape_string(av.shape()));
  }
  const std::size_t cols = av.cols();
  Tensor out({end - begin, cols},
             std::vector<double>(av.data() + begin * cols, av.data() + end * cols));
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, begin, cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    double* dst = t.grad_buffer(ia).data() + begin * cols;
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_rank2(av, "slice_cols");
  if (begin >= end || end > av.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + shape_string(av.shape()));
  }
  const std::size_t width = end - begin;
  Tensor out({av.rows(), width});
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < width; ++c) out(r, c) = av(r, begin + c);
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, begin, width](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < width; ++c) ga(r, begin + c) += g(r, c);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t cols = parts[0].value().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p, "concat_rows");
    if (p.value().cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.value().rows();
    ids.push_back(p.id);
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data(), v.data() + v.size(), out.data() + offset);
    offset += v.size();
  }
  return parts[0].tape->record(std::move(out), ids, [ids](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t id : ids) {
      const std::size_t n = t.value(id).size();
      if (t.needs_grad(id)) {
        double* dst = t.grad_buffer(id).data();
        for (std::size_t i = 0; i < n; ++i) dst[i] += g[offset + i];
      }
      offset += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    require_same_tape(parts[0], p, "concat_cols");
    if (p.value().rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.value().cols();
    ids.push_back(p.id);
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, offset + c) = v(r, c);
    offset += v.cols();
  }
  return parts[0].tape->record(std::move(out), ids, [ids](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t id : ids) {
      const std::size_t w = t.value(id).cols();
      if (t.needs_grad(id)) {
        Tensor& gi = t.grad_buffer(id);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < w; ++c) gi(r, c) += g(r, offset + c);
      }
      offset += w;
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  const Tensor& av = a.value();
  require_rank2(av, "gather_rows");
  if (index.empty()) throw ContractError("gather_rows: empty index");
  const std::size_t cols = av.cols();
  Tensor out({index.size(), cols});
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= av.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(index[i]) + " outside " +
                       shape_string(av.shape()));
    }
    std::copy_n(av.data() + index[i] * cols, cols, out.data() + i * cols);
  }
  const std::size_t ia = a.id;
  std::vector<std::size_t> idx(index.begin(), index.end());
  return a.tape->record(std::move(out), {ia}, [ia, idx = std::move(idx)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_buffer(ia);
    const std::size_t cols = g.cols();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double* src = g.data() + i * cols;
      double* dst = ga.data() + idx[i] * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var mask_multiply(Var a, const Tensor& mask) {
  require_same_shape(a.value(), mask, "mask_multiply");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, mask](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

Var scaled_dot_attention(Var q, Var k, Var v, std::size_t d) {
  if (d == 0) throw ContractError("scaled_dot_attention: d must be positive");
  if (k.value().rows() != v.value().rows()) {
    throw ShapeError("scaled_dot_attention: K and V row counts differ");
  }
  Var scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
  return matmul(softmax_rows(scores), v);
}

}  // namespace genad::numerics
