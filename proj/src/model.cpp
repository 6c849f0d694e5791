#include "ducd/model.hpp"

#include <cmath>

namespace ducd {

Variant variant_from_string(const std::string& s) {
  if (s == "base") return Variant::base;
  if (s == "mdam") return Variant::mdam;
  if (s == "full") return Variant::full;
  throw ConfigError(cat("unknown variant '", s, "' (base|mdam|full)"));
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::base:
      return "base";
    case Variant::mdam:
      return "mdam";
    default:
      return "full";
  }
}

void ModelConfig::validate() const {
  if (scales < 2) throw ConfigError(cat("scales must be >= 2, got ", scales));
  if (base_channels < 1)
    throw ConfigError(cat("base_channels must be >= 1, got ", base_channels));
  if (!(margin > 0.0)) throw ConfigError(cat("margin must be > 0"));
  if (!(threshold > 0.0 && threshold < margin))
    throw ConfigError(cat("threshold must lie in (0, margin), got ",
                          threshold, " with margin ", margin));
  if (attention_cap < 1) throw ConfigError("attention_cap must be >= 1");
}

DualUNet::DualUNet(ModelConfig cfg, std::int64_t input_h,
                   std::int64_t input_w, std::uint64_t seed)
    : cfg_(cfg), input_h_(input_h), input_w_(input_w) {
  cfg_.validate();
  const std::int64_t div = std::int64_t{1} << (cfg_.scales - 1);
  if (input_h % div != 0 || input_w % div != 0)
    throw ShapeError(cat("input ", input_h, "x", input_w,
                         " not divisible by 2^(scales-1) = ", div));

  Rng rng(seed);
  const int s_count = cfg_.scales;

  for (int s = 0; s < s_count; ++s) {
    const std::int64_t cin = s == 0 ? cfg_.input_channels
                                    : cfg_.channels_at(s - 1);
    const std::int64_t c = cfg_.channels_at(s);
    const std::string base = cat("enc.s", s);
    params_.add(base + ".conv1.kernel", init_conv_kernel(c, cin, 3, rng));
    params_.add(base + ".conv1.bias", Tensor::zeros({c}));
    params_.add(base + ".conv2.kernel", init_conv_kernel(c, c, 3, rng));
    params_.add(base + ".conv2.bias", Tensor::zeros({c}));
  }

  if (cfg_.variant != Variant::base) {
    for (int s = 0; s < s_count; ++s) {
      const std::int64_t c = cfg_.channels_at(s);
      const std::string base = cat("mdam.s", s);
      params_.add(base + ".fuse.kernel", init_conv_kernel(c, 2 * c, 1, rng));
      params_.add(base + ".fuse.bias", Tensor::zeros({c}));
      if (attention_active_at(s)) {
        AttentionParams ap = make_attention_params(c, rng);
        params_.add(base + ".attn.wq", ap.wq);
        params_.add(base + ".attn.wk", ap.wk);
        params_.add(base + ".attn.wv", ap.wv);
      }
    }
  }

  for (int s = 0; s < s_count - 1; ++s) {
    const std::int64_t c = cfg_.channels_at(s);
    const std::int64_t cin = cfg_.channels_at(s + 1) + c;
    const std::string base = cat("dec.s", s);
    params_.add(base + ".conv1.kernel", init_conv_kernel(c, cin, 3, rng));
    params_.add(base + ".conv1.bias", Tensor::zeros({c}));
    params_.add(base + ".conv2.kernel", init_conv_kernel(c, c, 3, rng));
    params_.add(base + ".conv2.bias", Tensor::zeros({c}));
  }

  if (cfg_.variant == Variant::full) {
    for (int s = 0; s < s_count; ++s) {
      // Single-channel learned weight map, same spatial size as the
      // decoder features at this scale.
      params_.add(cat("wdfm.w", s),
                  Tensor::ones({1, input_h >> s, input_w >> s}));
    }
  }
}

bool DualUNet::attention_active_at(int scale) const {
  if (cfg_.variant == Variant::base) return false;
  const std::int64_t hw = (input_h_ >> scale) * (input_w_ >> scale);
  return hw <= cfg_.attention_cap;
}

std::vector<Tensor> DualUNet::encode(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != cfg_.input_channels)
    throw ShapeError(cat("encode: expected [B,", cfg_.input_channels,
                         ",H,W] input"));
  if (x.dim(2) != input_h_ || x.dim(3) != input_w_)
    throw ShapeError(cat("encode: model built for ", input_h_, "x", input_w_,
                         " inputs, got ", x.dim(2), "x", x.dim(3)));
  std::vector<Tensor> feats;
  feats.reserve(static_cast<std::size_t>(cfg_.scales));
  Tensor f = x;
  for (int s = 0; s < cfg_.scales; ++s) {
    if (s > 0) f = maxpool2(f);
    const std::string base = cat("enc.s", s);
    f = conv_block(f, params_.get(base + ".conv1.kernel"),
                   params_.get(base + ".conv1.bias"),
                   params_.get(base + ".conv2.kernel"),
                   params_.get(base + ".conv2.bias"));
    feats.push_back(f);
  }
  return feats;
}

std::pair<Tensor, Tensor> DualUNet::mdam(const Tensor& f1, const Tensor& f2,
                                         int scale) const {
  if (f1.shape() != f2.shape())
    throw ShapeError("mdam: branch features must have identical shapes");
  const std::string base = cat("mdam.s", scale);
  const Tensor& fuse_k = params_.get(base + ".fuse.kernel");
  const Tensor& fuse_b = params_.get(base + ".fuse.bias");

  Tensor d = abs(sub(f1, f2));
  Tensor g1 = conv2d(concat_channels(f1, d), fuse_k, fuse_b, 1, 0);
  Tensor g2 = conv2d(concat_channels(f2, d), fuse_k, fuse_b, 1, 0);
  if (attention_active_at(scale)) {
    AttentionParams ap{params_.get(base + ".attn.wq"),
                       params_.get(base + ".attn.wk"),
                       params_.get(base + ".attn.wv")};
    g1 = spatial_self_attention(g1, ap, cfg_.attention_cap);
    g2 = spatial_self_attention(g2, ap, cfg_.attention_cap);
  }
  return {g1, g2};
}

std::vector<Tensor> DualUNet::decode(
    const std::vector<Tensor>& features) const {
  if (static_cast<int>(features.size()) != cfg_.scales)
    throw ShapeError(cat("decode: expected ", cfg_.scales,
                         " feature scales, got ", features.size()));
  std::vector<Tensor> dec(features.size());
  dec[static_cast<std::size_t>(cfg_.scales - 1)] = features.back();
  for (int s = cfg_.scales - 2; s >= 0; --s) {
    Tensor up = upsample_bilinear2(dec[static_cast<std::size_t>(s + 1)]);
    Tensor cat_in =
        concat_channels(up, features[static_cast<std::size_t>(s)]);
    const std::string base = cat("dec.s", s);
    dec[static_cast<std::size_t>(s)] =
        conv_block(cat_in, params_.get(base + ".conv1.kernel"),
                   params_.get(base + ".conv1.bias"),
                   params_.get(base + ".conv2.kernel"),
                   params_.get(base + ".conv2.bias"));
  }
  return dec;
}

DualUNet::Forward DualUNet::forward_detailed(const Tensor& x1,
                                             const Tensor& x2) const {
  if (x1.shape() != x2.shape())
    throw ShapeError("forward: bitemporal inputs must have the same shape");
  if (x1.rank() != 4 || x1.dim(1) != cfg_.input_channels)
    throw ShapeError(cat("forward: expected [B,", cfg_.input_channels,
                         ",H,W] inputs"));
  for (const Tensor* t : {&x1, &x2}) {
    const double* p = t->data();
    const auto n = static_cast<std::size_t>(t->numel());
    for (std::size_t i = 0; i < n; ++i)
      if (!(p[i] >= 0.0 && p[i] <= 1.0))
        throw ValueError(cat("forward: input value ", p[i],
                             " outside [0,1] at flat index ", i));
  }

  std::vector<Tensor> f1 = encode(x1);
  std::vector<Tensor> f2 = encode(x2);
  if (cfg_.variant != Variant::base) {
    for (int s = 0; s < cfg_.scales; ++s) {
      auto [g1, g2] = mdam(f1[static_cast<std::size_t>(s)],
                           f2[static_cast<std::size_t>(s)], s);
      f1[static_cast<std::size_t>(s)] = g1;
      f2[static_cast<std::size_t>(s)] = g2;
    }
  }
  std::vector<Tensor> dec1 = decode(f1);
  std::vector<Tensor> dec2 = decode(f2);

  Forward result;
  if (cfg_.variant != Variant::full) {
    // Finest-scale differencing with unit weights.
    result.distance = channel_l2(dec1[0], dec2[0]);
    result.per_scale.push_back(result.distance);
    return result;
  }

  Tensor fused;
  for (int s = 0; s < cfg_.scales; ++s) {
    const Tensor& w = params_.get(cat("wdfm.w", s));
    Tensor u = mul_spatial_weight(dec1[static_cast<std::size_t>(s)], w);
    Tensor v = mul_spatial_weight(dec2[static_cast<std::size_t>(s)], w);
    Tensor ds = channel_l2(u, v);  // [B, H_s, W_s]
    const auto b = ds.dim(0);
    Tensor r = reshape(ds, {b, 1, input_h_ >> s, input_w_ >> s});
    for (int t = 0; t < s; ++t) r = upsample_bilinear2(r);
    r = reshape(r, {b, input_h_, input_w_});
    result.per_scale.push_back(r);
    fused = s == 0 ? r : add(fused, r);
  }
  result.distance = scale(fused, 1.0 / static_cast<double>(cfg_.scales));
  return result;
}

Tensor DualUNet::forward(const Tensor& x1, const Tensor& x2) const {
  return forward_detailed(x1, x2).distance;
}

Tensor DualUNet::predict(const Tensor& distance, double threshold) {
  if (!(threshold > 0.0))
    throw ValueError(cat("predict: threshold must be > 0, got ", threshold));
  Tensor out = Tensor::zeros(distance.shape());
  const double* d = distance.data();
  double* o = out.data();
  const auto n = static_cast<std::size_t>(distance.numel());
  for (std::size_t i = 0; i < n; ++i) o[i] = d[i] > threshold ? 1.0 : 0.0;
  return out;
}

}  // namespace ducd
