#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ducd/ops.hpp"
#include "ducd/rng.hpp"
#include "ducd/tensor.hpp"

namespace ducd {

// Ordered registry of trainable tensors keyed by hierarchical name
// ("enc.s0.conv1.kernel"). The two siamese branches read the same entries:
// weight sharing is structural, never copied. Iteration order is the
// registration order, which also fixes the checkpoint layout.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }

  void zero_grads();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Fan-in uniform initializer: +-sqrt(1 / (cin * k * k)), biases zero.
Tensor init_conv_kernel(std::int64_t cout, std::int64_t cin, std::int64_t k,
                        Rng& rng);

// conv(3x3, pad 1) -> relu -> conv(3x3, pad 1) -> relu; spatial size
// preserved. No normalization layers anywhere in this network.
Tensor conv_block(const Tensor& x, const Tensor& k1, const Tensor& b1,
                  const Tensor& k2, const Tensor& b2);

// 1x1 projections for scaled dot-product attention over spatial positions.
// wv starts at zero so a fresh attention block is the identity map.
struct AttentionParams {
  Tensor wq;  // [C,C]
  Tensor wk;  // [C,C]
  Tensor wv;  // [C,C]
};

AttentionParams make_attention_params(std::int64_t channels, Rng& rng);

// Full pairwise spatial self-attention with residual output:
//   Q,K,V = 1x1 projections of f
//   scores = softmax_rows(Q_flat^T K_flat / sqrt(C))   (HW x HW)
//   out    = f + reshape(V_flat scores^T)
// Throws ConfigError when H*W exceeds `cap` (the score matrix is (HW)^2);
// callers are expected to apply attention at coarser scales only.
Tensor spatial_self_attention(const Tensor& f, const AttentionParams& p,
                              std::int64_t cap = 4096);

}  // namespace ducd
