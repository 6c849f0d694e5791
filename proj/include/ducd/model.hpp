#pragma once

#include <string>
#include <vector>

#include "ducd/nn.hpp"

namespace ducd {

// Ablation variants:
//   base: siamese U-Net, raw encoder skips, distance at the finest scale
//         only with unit weights;
//   mdam: base + per-scale differential attention on the skip path;
//   full: mdam + learned per-scale weight maps and all-scale distance fusion.
// Each variant is a strict restriction of the next.
enum class Variant { base, mdam, full };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct ModelConfig {
  int scales = 4;
  int base_channels = 16;
  int input_channels = 3;
  double margin = 2.0;
  double threshold = 1.0;
  Variant variant = Variant::full;
  std::int64_t attention_cap = 4096;

  std::int64_t channels_at(int scale) const {
    return static_cast<std::int64_t>(base_channels) << scale;
  }
  void validate() const;
};

// Shared-weight siamese U-Net with multiscale differential attention and
// weighted multi-scale distance fusion. Both temporal branches run the same
// ParamStore entries; forward is pure given (inputs, params).
class DualUNet {
 public:
  // Builds and initializes all parameters for the configured variant.
  // Input spatial size is needed only for the full variant's weight maps.
  DualUNet(ModelConfig cfg, std::int64_t input_h, std::int64_t input_w,
           std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::int64_t input_h() const { return input_h_; }
  std::int64_t input_w() const { return input_w_; }

  // Multi-scale features; scale s has shape [B, C_s, H/2^s, W/2^s].
  std::vector<Tensor> encode(const Tensor& x) const;

  // Differential attention at one scale: d = |f1 - f2| fused into each
  // branch by a 1x1 conv, then shared spatial self-attention. Swapping
  // (f1, f2) swaps the outputs exactly.
  std::pair<Tensor, Tensor> mdam(const Tensor& f1, const Tensor& f2,
                                 int scale) const;

  // Decoder pyramid: coarsest feature upsampled and fused with skips;
  // returns per-scale outputs dec[0..S-1], dec[s] at scale-s resolution.
  std::vector<Tensor> decode(const std::vector<Tensor>& features) const;

  struct Forward {
    Tensor distance;                 // [B, H0, W0]
    std::vector<Tensor> per_scale;   // distances before fusion, full res
  };

  // Full pipeline to the distance map D. Inputs must be same-shaped
  // [B,3,H0,W0] with values in [0,1].
  Forward forward_detailed(const Tensor& x1, const Tensor& x2) const;
  Tensor forward(const Tensor& x1, const Tensor& x2) const;

  // Binary change map: 1 where d > threshold.
  static Tensor predict(const Tensor& distance, double threshold);

 private:
  bool attention_active_at(int scale) const;

  ModelConfig cfg_;
  std::int64_t input_h_;
  std::int64_t input_w_;
  ParamStore params_;
};

}  // namespace ducd
