#include "ducd/nn.hpp"

#include <cmath>

namespace ducd {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  if (index_.count(name) != 0)
    throw ConfigError(cat("duplicate parameter name: ", name));
  t.set_requires_grad(true);
  index_[name] = entries_.size();
  entries_.emplace_back(name, std::move(t));
  return entries_.back().second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ConfigError(cat("unknown parameter name: ", name));
  return entries_[it->second].second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ConfigError(cat("unknown parameter name: ", name));
  return entries_[it->second].second;
}

bool ParamStore::has(const std::string& name) const {
  return index_.count(name) != 0;
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

Tensor init_conv_kernel(std::int64_t cout, std::int64_t cin, std::int64_t k,
                        Rng& rng) {
  const double bound =
      std::sqrt(1.0 / static_cast<double>(cin * k * k));
  Tensor t = Tensor::zeros({cout, cin, k, k});
  double* d = t.data();
  const auto n = static_cast<std::size_t>(t.numel());
  for (std::size_t i = 0; i < n; ++i) d[i] = rng.uniform(-bound, bound);
  return t;
}

Tensor conv_block(const Tensor& x, const Tensor& k1, const Tensor& b1,
                  const Tensor& k2, const Tensor& b2) {
  Tensor h = relu(conv2d(x, k1, b1, /*stride=*/1, /*pad=*/1));
  return relu(conv2d(h, k2, b2, /*stride=*/1, /*pad=*/1));
}

AttentionParams make_attention_params(std::int64_t channels, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(channels));
  auto proj = [&] {
    Tensor t = Tensor::zeros({channels, channels});
    double* d = t.data();
    for (std::int64_t i = 0; i < t.numel(); ++i)
      d[i] = rng.uniform(-bound, bound);
    return t;
  };
  AttentionParams p;
  p.wq = proj();
  p.wk = proj();
  p.wv = Tensor::zeros({channels, channels});
  return p;
}

Tensor spatial_self_attention(const Tensor& f, const AttentionParams& p,
                              std::int64_t cap) {
  if (f.rank() != 4)
    throw ShapeError("spatial_self_attention: expected [B,C,H,W] input");
  const auto b = f.dim(0), c = f.dim(1), h = f.dim(2), w = f.dim(3);
  if (p.wq.dim(0) != c || p.wq.dim(1) != c)
    throw ShapeError(cat("spatial_self_attention: projections are ",
                         p.wq.dim(0), "x", p.wq.dim(1), " but features have ",
                         c, " channels"));
  const auto hw = h * w;
  if (hw > cap)
    throw ConfigError(cat(
        "spatial_self_attention: H*W = ", hw, " exceeds the attention cap ",
        cap, "; apply attention at coarser scales only"));
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(c));

  std::vector<Tensor> outs;
  outs.reserve(static_cast<std::size_t>(b));
  for (std::int64_t i = 0; i < b; ++i) {
    Tensor fi = reshape(select_batch(f, i), {c, hw});
    Tensor q = matmul(p.wq, fi);
    Tensor k = matmul(p.wk, fi);
    Tensor v = matmul(p.wv, fi);
    Tensor scores = softmax_rows(scale(matmul(transpose2d(q), k), inv_sqrt_c));
    Tensor attended = matmul(v, transpose2d(scores));
    outs.push_back(reshape(add(fi, attended), {1, c, h, w}));
  }
  return stack_batch(outs);
}

}  // namespace ducd
