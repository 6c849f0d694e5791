#include "ducd/metrics.hpp"

namespace ducd {
namespace {

void count_into(const Tensor& pred, const Tensor& label, std::int64_t& tp,
                std::int64_t& fp, std::int64_t& fn, std::int64_t& tn) {
  if (pred.shape() != label.shape())
    throw ShapeError("confusion: prediction and label shapes differ");
  const double* p = pred.data();
  const double* l = label.data();
  const auto n = static_cast<std::size_t>(pred.numel());
  for (std::size_t i = 0; i < n; ++i) {
    const bool pv = p[i] != 0.0;
    const bool lv = l[i] != 0.0;
    if ((p[i] != 0.0 && p[i] != 1.0) || (l[i] != 0.0 && l[i] != 1.0))
      throw ValueError(cat("confusion: non-binary entry at flat index ", i));
    if (pv && lv)
      ++tp;
    else if (pv && !lv)
      ++fp;
    else if (!pv && lv)
      ++fn;
    else
      ++tn;
  }
}

}  // namespace

Metrics Metrics::from_counts(std::int64_t tp, std::int64_t fp,
                             std::int64_t fn, std::int64_t tn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.tn = tn;
  const auto ratio = [&m](std::int64_t num, std::int64_t den) {
    if (den == 0) {
      m.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  if (m.precision + m.recall > 0.0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  else
    m.degenerate = true;
  m.iou = ratio(tp, tp + fp + fn);
  return m;
}

Metrics confusion(const Tensor& pred, const Tensor& label) {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  count_into(pred, label, tp, fp, fn, tn);
  return Metrics::from_counts(tp, fp, fn, tn);
}

void ConfusionAccumulator::add(const Tensor& pred, const Tensor& label) {
  count_into(pred, label, tp, fp, fn, tn);
}

}  // namespace ducd
