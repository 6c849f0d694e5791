#include <algorithm>
#include <cmath>
#include <set>

#include "ducd/grad_check.hpp"
#include "ducd/loss.hpp"
#include "ducd/train.hpp"

namespace ducd {
namespace {

constexpr double kLinearTol = 1e-8;
constexpr double kSmoothTol = 1e-4;

Tensor rand_t(std::vector<std::int64_t> shape, std::uint64_t seed,
              double lo = -1.0, double hi = 1.0) {
  return Tensor::uniform(std::move(shape), seed, lo, hi);
}

// Shift entries away from zero so piecewise-linear ops see no kink within
// the finite-difference step.
Tensor away_from_zero(Tensor t, double gap) {
  double* d = t.data();
  for (std::int64_t i = 0; i < t.numel(); ++i)
    d[i] += d[i] >= 0.0 ? gap : -gap;
  return t;
}

// Scalar head: sum(out * w) with a fixed random weighting, so every output
// coordinate contributes a distinct sensitivity.
Tensor weighted_sum(const Tensor& out, std::uint64_t seed) {
  return reduce_sum(mul(out, rand_t(out.shape(), seed)));
}

}  // namespace

std::vector<GradCheckEntry> gradcheck_ops() {
  std::vector<GradCheckEntry> results;
  auto check = [&results](const std::string& name, double tol,
                          const std::function<Tensor(const Tensor&)>& f,
                          Tensor x) {
    results.push_back({name, grad_check(f, std::move(x)), tol});
  };

  // Elementwise binaries, both operands.
  {
    Tensor b = rand_t({3, 4}, 11);
    check("add/a", kLinearTol,
          [b](const Tensor& x) { return weighted_sum(add(x, b), 500); },
          rand_t({3, 4}, 12));
    Tensor a = rand_t({3, 4}, 13);
    check("add/b", kLinearTol,
          [a](const Tensor& x) { return weighted_sum(add(a, x), 501); },
          rand_t({3, 4}, 14));
    check("sub/a", kLinearTol,
          [b](const Tensor& x) { return weighted_sum(sub(x, b), 502); },
          rand_t({3, 4}, 15));
    check("sub/b", kLinearTol,
          [a](const Tensor& x) { return weighted_sum(sub(a, x), 503); },
          rand_t({3, 4}, 16));
    check("mul/a", kLinearTol,
          [b](const Tensor& x) { return weighted_sum(mul(x, b), 504); },
          rand_t({3, 4}, 17));
    check("mul/b", kLinearTol,
          [a](const Tensor& x) { return weighted_sum(mul(a, x), 505); },
          rand_t({3, 4}, 18));
  }
  check("scale", kLinearTol,
        [](const Tensor& x) { return weighted_sum(scale(x, 1.7), 506); },
        rand_t({2, 5}, 19));
  check("abs", kLinearTol,
        [](const Tensor& x) { return weighted_sum(abs(x), 507); },
        away_from_zero(rand_t({3, 4}, 20), 0.3));
  check("relu", kLinearTol,
        [](const Tensor& x) { return weighted_sum(relu(x), 508); },
        away_from_zero(rand_t({3, 4}, 21), 0.3));
  check("sigmoid", kSmoothTol,
        [](const Tensor& x) { return weighted_sum(sigmoid(x), 509); },
        rand_t({3, 4}, 22, -3.0, 3.0));

  {
    Tensor b = rand_t({4, 2}, 23);
    check("matmul/a", kLinearTol,
          [b](const Tensor& x) { return weighted_sum(matmul(x, b), 510); },
          rand_t({3, 4}, 24));
    Tensor a = rand_t({3, 4}, 25);
    check("matmul/b", kLinearTol,
          [a](const Tensor& x) { return weighted_sum(matmul(a, x), 511); },
          rand_t({4, 2}, 26));
  }
  check("softmax_rows", kSmoothTol,
        [](const Tensor& x) { return weighted_sum(softmax_rows(x), 512); },
        rand_t({4, 5}, 27, -2.0, 2.0));

  {
    Tensor input = rand_t({2, 2, 5, 6}, 28);
    Tensor kernel = rand_t({3, 2, 3, 3}, 29);
    Tensor bias = rand_t({3}, 30);
    check("conv2d/input", kLinearTol,
          [kernel, bias](const Tensor& x) {
            return weighted_sum(conv2d(x, kernel, bias, 1, 1), 513);
          },
          input);
    check("conv2d/kernel", kLinearTol,
          [input, bias](const Tensor& x) {
            return weighted_sum(conv2d(input, x, bias, 1, 1), 514);
          },
          kernel);
    check("conv2d/bias", kLinearTol,
          [input, kernel](const Tensor& x) {
            return weighted_sum(conv2d(input, kernel, x, 1, 1), 515);
          },
          bias);
    check("conv2d/input_stride2", kLinearTol,
          [kernel, bias](const Tensor& x) {
            return weighted_sum(conv2d(x, kernel, bias, 2, 0), 516);
          },
          rand_t({1, 2, 7, 7}, 31));
    check("conv2d/kernel_stride2", kLinearTol,
          [bias](const Tensor& x) {
            Tensor input = rand_t({1, 2, 7, 7}, 32);
            return weighted_sum(conv2d(input, x, bias, 2, 0), 517);
          },
          rand_t({3, 2, 3, 3}, 33));
  }
  check("maxpool2", kLinearTol,
        [](const Tensor& x) { return weighted_sum(maxpool2(x), 518); },
        rand_t({2, 2, 4, 4}, 34));
  check("upsample_bilinear2", kLinearTol,
        [](const Tensor& x) {
          return weighted_sum(upsample_bilinear2(x), 519);
        },
        rand_t({2, 2, 3, 3}, 35));
  {
    Tensor b = rand_t({2, 3, 3, 4}, 36);
    check("concat_channels/a", kLinearTol,
          [b](const Tensor& x) {
            return weighted_sum(concat_channels(x, b), 520);
          },
          rand_t({2, 2, 3, 4}, 37));
    Tensor a = rand_t({2, 2, 3, 4}, 38);
    check("concat_channels/b", kLinearTol,
          [a](const Tensor& x) {
            return weighted_sum(concat_channels(a, x), 521);
          },
          rand_t({2, 3, 3, 4}, 39));
  }
  check("reduce_sum/full", kLinearTol,
        [](const Tensor& x) { return reduce_sum(x); }, rand_t({3, 4, 2}, 40));
  check("reduce_sum/axis0", kLinearTol,
        [](const Tensor& x) {
          return weighted_sum(reduce_sum(x, {0}), 522);
        },
        rand_t({3, 4}, 41));
  check("reduce_mean/full", kLinearTol,
        [](const Tensor& x) { return reduce_mean(x); }, rand_t({4, 5}, 42));
  check("reduce_mean/axis1", kLinearTol,
        [](const Tensor& x) {
          return weighted_sum(reduce_mean(x, {1}), 523);
        },
        rand_t({3, 4}, 43));
  check("reshape", kLinearTol,
        [](const Tensor& x) {
          return weighted_sum(reshape(x, {4, 3}), 524);
        },
        rand_t({2, 6}, 44));
  check("transpose2d", kLinearTol,
        [](const Tensor& x) { return weighted_sum(transpose2d(x), 525); },
        rand_t({3, 5}, 45));
  check("select_batch", kLinearTol,
        [](const Tensor& x) {
          return weighted_sum(select_batch(x, 1), 526);
        },
        rand_t({3, 2, 2}, 46));
  {
    Tensor other = rand_t({1, 2, 3}, 47);
    check("stack_batch", kLinearTol,
          [other](const Tensor& x) {
            return weighted_sum(stack_batch({x, other}), 527);
          },
          rand_t({1, 2, 3}, 48));
  }
  {
    Tensor w = rand_t({1, 3, 4}, 49);
    check("mul_spatial_weight/x", kLinearTol,
          [w](const Tensor& x) {
            return weighted_sum(mul_spatial_weight(x, w), 528);
          },
          rand_t({2, 3, 3, 4}, 50));
    Tensor x0 = rand_t({2, 3, 3, 4}, 51);
    check("mul_spatial_weight/w", kLinearTol,
          [x0](const Tensor& x) {
            return weighted_sum(mul_spatial_weight(x0, x), 529);
          },
          rand_t({1, 3, 4}, 52));
  }
  {
    // Keep per-pixel distances bounded away from the sqrt cusp.
    Tensor b = rand_t({2, 3, 3, 3}, 53, 1.5, 2.5);
    check("channel_l2/a", kSmoothTol,
          [b](const Tensor& x) {
            return weighted_sum(channel_l2(x, b), 530);
          },
          rand_t({2, 3, 3, 3}, 54, 0.0, 1.0));
    Tensor a = rand_t({2, 3, 3, 3}, 55, 0.0, 1.0);
    check("channel_l2/b", kSmoothTol,
          [a](const Tensor& x) {
            return weighted_sum(channel_l2(a, x), 531);
          },
          rand_t({2, 3, 3, 3}, 56, 1.5, 2.5));
  }
  {
    // Distances straddle the margin but keep clear of the hinge kink.
    Tensor labels = Tensor::from_data({2, 3}, {1, 0, 1, 0, 0, 1});
    Tensor d = Tensor::from_data({2, 3}, {0.4, 1.1, 2.6, 0.2, 3.0, 1.5});
    check("bcl_loss/d", kLinearTol,
          [labels](const Tensor& x) { return bcl_loss(x, labels, 2.0); },
          d);
  }
  {
    Rng arng(57);
    AttentionParams ap = make_attention_params(3, arng);
    // A zero value projection hides wq/wk; perturb it to a generic point.
    ap.wv = rand_t({3, 3}, 58, -0.5, 0.5);
    Tensor f0 = rand_t({1, 3, 2, 2}, 59, 0.0, 1.0);
    check("attention/f", kSmoothTol,
          [ap](const Tensor& x) {
            return weighted_sum(spatial_self_attention(x, ap), 532);
          },
          f0);
    for (const auto& [name, pick] :
         {std::pair<const char*, int>{"attention/wq", 0},
          {"attention/wk", 1},
          {"attention/wv", 2}}) {
      check(name, kSmoothTol,
            [ap, f0, pick](const Tensor& x) {
              AttentionParams p = ap;
              (pick == 0 ? p.wq : pick == 1 ? p.wk : p.wv) = x;
              return weighted_sum(spatial_self_attention(f0, p), 533);
            },
            pick == 0 ? ap.wq : pick == 1 ? ap.wk : ap.wv);
    }
  }
  {
    Tensor x0 = rand_t({1, 2, 4, 4}, 60, 0.0, 1.0);
    Tensor k1 = rand_t({3, 2, 3, 3}, 61, -0.3, 0.3);
    Tensor b1 = rand_t({3}, 62, 0.01, 0.2);
    Tensor k2 = rand_t({3, 3, 3, 3}, 63, -0.3, 0.3);
    Tensor b2 = rand_t({3}, 64, 0.01, 0.2);
    check("conv_block/k1", kSmoothTol,
          [x0, b1, k2, b2](const Tensor& x) {
            return reduce_sum(conv_block(x0, x, b1, k2, b2));
          },
          k1);
    check("conv_block/k2", kSmoothTol,
          [x0, k1, b1, b2](const Tensor& x) {
            return reduce_sum(conv_block(x0, k1, b1, x, b2));
          },
          k2);
  }
  return results;
}

std::vector<GradCheckEntry> gradcheck_model() {
  const std::int64_t hw = 16;
  Tensor x1 = rand_t({2, 3, hw, hw}, 101, 0.05, 0.95);
  Tensor x2 = rand_t({2, 3, hw, hw}, 102, 0.05, 0.95);
  Tensor labels = Tensor::zeros({2, hw, hw});
  {
    Rng lr(103);
    double* l = labels.data();
    for (std::int64_t i = 0; i < labels.numel(); ++i)
      l[i] = lr.uniform01() < 0.5 ? 1.0 : 0.0;
  }

  ModelConfig mc;  // full variant, attention at every 16x16 scale
  auto model = std::make_shared<DualUNet>(mc, hw, hw, 7);

  // Move every parameter off its init point (wv starts at zero, which
  // would make the attention projections vacuously pass).
  {
    Rng noise(104);
    for (auto& [name, p] : model->params().entries()) {
      double* d = p.data();
      for (std::int64_t i = 0; i < p.numel(); ++i)
        d[i] += noise.uniform(-0.05, 0.05);
    }
  }

  auto f = [model, x1, x2, labels]() {
    return bcl_loss(model->forward(x1, x2), labels,
                    model->config().margin);
  };

  // 64 random parameter coordinates across the whole store.
  std::int64_t total = 0;
  for (const auto& [name, p] : model->params().entries()) total += p.numel();
  std::set<std::int64_t> picked;
  Rng rng(105);
  while (picked.size() < 64)
    picked.insert(static_cast<std::int64_t>(rng.below(
        static_cast<std::uint64_t>(total))));

  std::vector<GradCheckEntry> results;
  std::int64_t offset = 0;
  for (auto& [name, p] : model->params().entries()) {
    std::vector<std::size_t> coords;
    for (auto flat : picked)
      if (flat >= offset && flat < offset + p.numel())
        coords.push_back(static_cast<std::size_t>(flat - offset));
    offset += p.numel();
    if (coords.empty()) continue;
    const double err = grad_check_coords(f, p, coords);
    results.push_back({cat("model/", name), err, kSmoothTol});
  }
  return results;
}

}  // namespace ducd
