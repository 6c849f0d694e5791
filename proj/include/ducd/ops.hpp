#pragma once

#include <vector>

#include "ducd/tensor.hpp"

namespace ducd {

// Differentiable tensor operations. Shapes must match exactly for binary
// ops; there is no broadcasting except multiplication by a scalar constant
// and the spatial weight map below. Every op validates its operands and
// throws ShapeError on mismatch.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor scale(const Tensor& a, double c);

// a: [M,K] x b: [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);

// Row-wise softmax of an [M,N] matrix, computed with max subtraction.
Tensor softmax_rows(const Tensor& a);

// input: [B,Cin,H,W], kernel: [Cout,Cin,k,k], bias: [Cout].
// Zero padding, floor output arithmetic.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int pad);

// 2x2 max pooling; H and W must be even. Gradient routes to the first
// (row-major) argmax of each window.
Tensor maxpool2(const Tensor& input);

// Bilinear x2 upsampling, align-corners=false convention.
Tensor upsample_bilinear2(const Tensor& input);

// Channel concatenation of [B,C1,H,W] and [B,C2,H,W].
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Reductions; empty axes reduce everything to a [1] scalar.
Tensor reduce_sum(const Tensor& a, const std::vector<int>& axes = {});
Tensor reduce_mean(const Tensor& a, const std::vector<int>& axes = {});

// Structural ops.
Tensor reshape(const Tensor& a, std::vector<std::int64_t> new_shape);
Tensor transpose2d(const Tensor& a);
// Slice one batch item: [B,...] -> [1,...].
Tensor select_batch(const Tensor& a, std::int64_t index);
// Inverse of select_batch: stack [1,...] parts into [B,...].
Tensor stack_batch(const std::vector<Tensor>& parts);

// out[b,c,y,x] = x[b,c,y,x] * w[0,y,x]; w is a single-channel spatial map
// shared across batch and channels.
Tensor mul_spatial_weight(const Tensor& x, const Tensor& w);

// Per-pixel Euclidean distance over channels: [B,C,H,W] x2 -> [B,H,W].
// Zero distance routes zero gradient.
Tensor channel_l2(const Tensor& a, const Tensor& b);

}  // namespace ducd
