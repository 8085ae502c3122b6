#pragma once

#include <cstddef>

#include "genad/numerics/tape.hpp"

namespace genad::numerics {

/// Multi-head scaled dot-product self-attention as a single recorded primitive.
///
/// `q`, `k`, `v` are (groups * tokens) x width matrices holding `groups` independent
/// token sets stacked by rows. Each head attends within its group over the column
/// block [h * width / heads, (h + 1) * width / heads), with logits scaled by
/// 1 / sqrt(width / heads). The result has the same shape as `q`, with head
/// outputs written back into their column blocks.
Var multi_head_attention(Var q, Var k, Var v, std::size_t groups, std::size_t heads);

}  // namespace genad::numerics
