#pragma once

#include "ducd/tensor.hpp"

namespace ducd {

struct PixelCounts {
  std::int64_t unchanged = 0;  // p_u
  std::int64_t changed = 0;    // p_c
};

// Exact counts over a binary label map; throws ValueError on any entry
// that is not exactly 0 or 1.
PixelCounts pixel_counts(const Tensor& labels);

// Batch-balanced contrastive loss over a distance map d and binary labels:
//
//   L = 1/2 * 1/p_u * sum (1 - M) d  +  1/2 * 1/p_c * sum M max(0, m - d)
//
// A term whose class is absent from the batch (p_u = 0 or p_c = 0) is
// defined as 0; its numerator sum is necessarily 0 as well. Gradient flows
// through d only. Duplicating a batch leaves the value unchanged: sums and
// counts scale together.
Tensor bcl_loss(const Tensor& d, const Tensor& labels, double margin);

}  // namespace ducd
