#pragma once

#include <cstdint>
#include <string>

#include "ducd/tensor.hpp"

namespace ducd {

// Confusion counts and derived scores; "changed" is the positive class.
// Any 0/0 ratio is reported as 0 with the degenerate flag set.
struct Metrics {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  bool degenerate = false;

  std::int64_t total() const { return tp + fp + fn + tn; }

  static Metrics from_counts(std::int64_t tp, std::int64_t fp,
                             std::int64_t fn, std::int64_t tn);
};

// Per-pixel confusion of two same-shaped binary maps.
Metrics confusion(const Tensor& pred, const Tensor& label);

// Count accumulation for pooled evaluation over many batches.
struct ConfusionAccumulator {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  void add(const Tensor& pred, const Tensor& label);
  Metrics finish() const { return Metrics::from_counts(tp, fp, fn, tn); }
};

}  // namespace ducd
