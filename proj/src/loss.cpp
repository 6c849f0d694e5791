#include "ducd/loss.hpp"

#include "ducd/ops.hpp"

namespace ducd {

PixelCounts pixel_counts(const Tensor& labels) {
  PixelCounts counts;
  const double* p = labels.data();
  const auto n = static_cast<std::size_t>(labels.numel());
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] == 0.0)
      ++counts.unchanged;
    else if (p[i] == 1.0)
      ++counts.changed;
    else
      throw ValueError(cat("pixel_counts: non-binary label ", p[i],
                           " at flat index ", i));
  }
  return counts;
}

Tensor bcl_loss(const Tensor& d, const Tensor& labels, double margin) {
  if (d.shape() != labels.shape())
    throw ShapeError("bcl_loss: distance map and labels must match");
  if (!(margin > 0.0)) throw ValueError("bcl_loss: margin must be > 0");
  const PixelCounts counts = pixel_counts(labels);

  Tensor loss;
  if (counts.unchanged > 0) {
    Tensor unchanged_mask = sub(Tensor::ones(labels.shape()), labels);
    Tensor term = scale(reduce_sum(mul(unchanged_mask, d)),
                        0.5 / static_cast<double>(counts.unchanged));
    loss = term;
  }
  if (counts.changed > 0) {
    Tensor hinge = relu(sub(Tensor::full(d.shape(), margin), d));
    Tensor term = scale(reduce_sum(mul(labels, hinge)),
                        0.5 / static_cast<double>(counts.changed));
    loss = loss.defined() ? add(loss, term) : term;
  }
  if (!loss.defined()) loss = Tensor::zeros({1});
  return loss;
}

}  // namespace ducd
