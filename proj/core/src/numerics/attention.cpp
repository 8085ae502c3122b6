#include "genad/numerics/attention.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "kernels.hpp"
#include "genad/errors.hpp"

namespace genad::numerics {
namespace {

using detail::ConstView;
using detail::gemm;
using detail::MutView;

struct Layout {
  std::size_t groups, tokens, width, heads, head_width;
};

ConstView head_view(const Tensor& t, const Layout& l, std::size_t g, std::size_t h) {
  return {t.data() + g * l.tokens * l.width + h * l.head_width, l.tokens, l.head_width, l.width};
}

MutView head_view(Tensor& t, const Layout& l, std::size_t g, std::size_t h) {
  return {t.data() + g * l.tokens * l.width + h * l.head_width, l.tokens, l.head_width, l.width};
}

}  // namespace

Var multi_head_attention(Var q, Var k, Var v, std::size_t groups, std::size_t heads) {
  if (q.tape != k.tape || q.tape != v.tape) {
    throw ContractError("multi_head_attention: operands live on different tapes");
  }
  const Tensor& qv = q.value();
  if (!qv.same_shape(k.value()) || !qv.same_shape(v.value())) {
    throw ShapeError("multi_head_attention: Q, K, V shapes differ");
  }
  require_rank2(qv, "multi_head_attention");
  if (groups == 0 || heads == 0 || qv.rows() % groups != 0 || qv.cols() % heads != 0) {
    throw ShapeError("multi_head_attention: " + shape_string(qv.shape()) + " cannot be split into " +
                     std::to_string(groups) + " groups and " + std::to_string(heads) + " heads");
  }
  const Layout l{groups, qv.rows() / groups, qv.cols(), heads, qv.cols() / heads};
  const double scale = 1.0 / std::sqrt(static_cast<double>(l.head_width));
  const std::size_t tt = l.tokens * l.tokens;

  auto probs = std::make_shared<std::vector<double, AlignedAllocator<double>>>(groups * heads * tt);
  Tensor out(qv.shape());
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* p = probs->data() + (g * heads + h) * tt;
      MutView pv{p, l.tokens, l.tokens, l.tokens};
      gemm(pv, head_view(qv, l, g, h), false, head_view(kv, l, g, h), true, scale, false);
      for (std::size_t r = 0; r < l.tokens; ++r) detail::softmax_row(p + r * l.tokens, l.tokens);
      gemm(head_view(out, l, g, h), ConstView{p, l.tokens, l.tokens, l.tokens}, false,
           head_view(vv, l, g, h), false, 1.0, false);
    }
  }

  const std::size_t iq = q.id, ik = k.id, iv = v.id;
  return q.tape->record(
      std::move(out), {iq, ik, iv}, [iq, ik, iv, l, scale, probs](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& qv = t.value(iq);
        const Tensor& kv = t.value(ik);
        const Tensor& vv = t.value(iv);
        const bool need_q = t.needs_grad(iq);
        const bool need_k = t.needs_grad(ik);
        const bool need_v = t.needs_grad(iv);
        Tensor* gq = need_q ? &t.grad_buffer(iq) : nullptr;
        Tensor* gk = need_k ? &t.grad_buffer(ik) : nullptr;
        Tensor* gv = need_v ? &t.grad_buffer(iv) : nullptr;
        const std::size_t tt = l.tokens * l.tokens;
        std::vector<double, AlignedAllocator<double>> dp(tt);
        for (std::size_t grp = 0; grp < l.groups; ++grp) {
          for (std::size_t h = 0; h < l.heads; ++h) {
            const double* p = probs->data() + (grp * l.heads + h) * tt;
            const ConstView pview{p, l.tokens, l.tokens, l.tokens};
            const ConstView gout = head_view(g, l, grp, h);
            if (need_v) gemm(head_view(*gv, l, grp, h), pview, true, gout, false, 1.0, true);
            if (!need_q && !need_k) continue;
            gemm(MutView{dp.data(), l.tokens, l.tokens, l.tokens}, gout, false,
                 head_view(vv, l, grp, h), true, 1.0, false);
            for (std::size_t r = 0; r < l.tokens; ++r) {
              const double* pr = p + r * l.tokens;
              double* dr = dp.data() + r * l.tokens;
              double dot = 0.0;
              for (std::size_t c = 0; c < l.tokens; ++c) dot += pr[c] * dr[c];
              for (std::size_t c = 0; c < l.tokens; ++c) dr[c] = pr[c] * (dr[c] - dot);
            }
            const ConstView ds{dp.data(), l.tokens, l.tokens, l.tokens};
            if (need_q) {
              gemm(head_view(*gq, l, grp, h), ds, false, head_view(kv, l, grp, h), false, scale,
                   true);
            }
            if (need_k) {
              gemm(head_view(*gk, l, grp, h), ds, true, head_view(qv, l, grp, h), false, scale,
                   true);
            }
          }
        }
      });
}

}  // namespace genad::numerics
