#include "ducd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <memory>

#include "ducd/kernels/api.hpp"

namespace ducd {
namespace {

using kernels::table;

std::string shape_str(const std::vector<std::int64_t>& s) {
  std::string r = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + "]";
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(cat(op, ": shape mismatch ", shape_str(a.shape()),
                         " vs ", shape_str(b.shape())));
}

void check_rank(const char* op, const Tensor& a, int rank) {
  if (a.rank() != rank)
    throw ShapeError(cat(op, ": expected rank ", rank, " tensor, got ",
                         shape_str(a.shape())));
}

Tensor like(const Tensor& a) { return Tensor::zeros(a.shape()); }

void accum(TensorImpl& dst, const double* src, std::size_t n, double c = 1.0) {
  dst.ensure_grad();
  table().axpy(c, src, dst.grad.data(), n);
}

bool conv_tamper_enabled() {
  static const bool on = std::getenv("DUCD_TAMPER_CONV_BACKWARD") != nullptr;
  return on;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = like(a);
  const auto n = static_cast<std::size_t>(a.numel());
  table().add(a.data(), b.data(), out.data(), n);
  auto ai = a.impl(), bi = b.impl();
  detail::record(out, "add", {a, b}, [ai, bi, n](TensorImpl& o) {
    if (ai->requires_grad) accum(*ai, o.grad.data(), n);
    if (bi->requires_grad) accum(*bi, o.grad.data(), n);
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = like(a);
  const auto n = static_cast<std::size_t>(a.numel());
  table().sub(a.data(), b.data(), out.data(), n);
  auto ai = a.impl(), bi = b.impl();
  detail::record(out, "sub", {a, b}, [ai, bi, n](TensorImpl& o) {
    if (ai->requires_grad) accum(*ai, o.grad.data(), n);
    if (bi->requires_grad) accum(*bi, o.grad.data(), n, -1.0);
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out = like(a);
  const auto n = static_cast<std::size_t>(a.numel());
  table().mul(a.data(), b.data(), out.data(), n);
  auto ai = a.impl(), bi = b.impl();
  detail::record(out, "mul", {a, b}, [ai, bi, n](TensorImpl& o) {
    if (ai->requires_grad) {
      ai->ensure_grad();
      table().fma_acc(bi->data.data(), o.grad.data(), ai->grad.data(), n);
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      table().fma_acc(ai->data.data(), o.grad.data(), bi->grad.data(), n);
    }
  });
  return out;
}

Tensor abs(const Tensor& a) {
  Tensor out = like(a);
  const auto n = static_cast<std::size_t>(a.numel());
  table().abs(a.data(), out.data(), n);
  auto ai = a.impl();
  detail::record(out, "abs", {a}, [ai, n](TensorImpl& o) {
    ai->ensure_grad();
    table().abs_bwd(ai->data.data(), o.grad.data(), ai->grad.data(), n);
  });
  return out;
}

Tensor relu(const Tensor& a) {
  Tensor out = like(a);
  const auto n = static_cast<std::size_t>(a.numel());
  table().relu(a.data(), out.data(), n);
  auto ai = a.impl();
  detail::record(out, "relu", {a}, [ai, n](TensorImpl& o) {
    ai->ensure_grad();
    table().relu_bwd(ai->data.data(), o.grad.data(), ai->grad.data(), n);
  });
  return out;
}

Tensor sigmoid(const Tensor& a) {
  Tensor out = like(a);
  const auto n = static_cast<std::size_t>(a.numel());
  table().sigmoid(a.data(), out.data(), n);
  auto ai = a.impl();
  detail::record(out, "sigmoid", {a}, [ai, n](TensorImpl& o) {
    ai->ensure_grad();
    table().sigmoid_bwd(o.data.data(), o.grad.data(), ai->grad.data(), n);
  });
  return out;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = like(a);
  const auto n = static_cast<std::size_t>(a.numel());
  table().scale(a.data(), c, out.data(), n);
  auto ai = a.impl();
  detail::record(out, "scale", {a}, [ai, c, n](TensorImpl& o) {
    if (ai->requires_grad) accum(*ai, o.grad.data(), n, c);
  });
  return out;
}

namespace {
void transpose_copy(const double* src, double* dst, std::int64_t rows,
                    std::int64_t cols) {
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c)
      dst[c * rows + r] = src[r * cols + c];
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank("matmul", a, 2);
  check_rank("matmul", b, 2);
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError(cat("matmul: inner dimensions disagree, ",
                         shape_str(a.shape()), " x ", shape_str(b.shape())));
  Tensor out = Tensor::zeros({m, n});
  table().matmul(a.data(), b.data(), out.data(), static_cast<int>(m),
                 static_cast<int>(k), static_cast<int>(n), false);
  auto ai = a.impl(), bi = b.impl();
  detail::record(out, "matmul", {a, b}, [ai, bi, m, k, n](TensorImpl& o) {
    if (ai->requires_grad) {
      ai->ensure_grad();
      std::vector<double> bt(static_cast<std::size_t>(k) * n);
      transpose_copy(bi->data.data(), bt.data(), k, n);
      table().matmul(o.grad.data(), bt.data(), ai->grad.data(),
                     static_cast<int>(m), static_cast<int>(n),
                     static_cast<int>(k), true);
    }
    if (bi->requires_grad) {
      bi->ensure_grad();
      std::vector<double> at(static_cast<std::size_t>(m) * k);
      transpose_copy(ai->data.data(), at.data(), m, k);
      table().matmul(at.data(), o.grad.data(), bi->grad.data(),
                     static_cast<int>(k), static_cast<int>(m),
                     static_cast<int>(n), true);
    }
  });
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  check_rank("softmax_rows", a, 2);
  const auto m = a.dim(0), n = a.dim(1);
  Tensor out = like(a);
  table().softmax_fwd(a.data(), out.data(), static_cast<int>(m),
                      static_cast<int>(n));
  auto ai = a.impl();
  detail::record(out, "softmax_rows", {a}, [ai, m, n](TensorImpl& o) {
    ai->ensure_grad();
    table().softmax_bwd(o.data.data(), o.grad.data(), ai->grad.data(),
                        static_cast<int>(m), static_cast<int>(n));
  });
  return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int pad) {
  check_rank("conv2d", input, 4);
  check_rank("conv2d", kernel, 4);
  check_rank("conv2d", bias, 1);
  if (kernel.dim(2) != kernel.dim(3))
    throw ShapeError(cat("conv2d: kernel must be square, got ",
                         shape_str(kernel.shape())));
  const int b = static_cast<int>(input.dim(0));
  const int cin = static_cast<int>(input.dim(1));
  const int h = static_cast<int>(input.dim(2));
  const int w = static_cast<int>(input.dim(3));
  const int cout = static_cast<int>(kernel.dim(0));
  const int k = static_cast<int>(kernel.dim(2));
  if (kernel.dim(1) != cin)
    throw ShapeError(cat("conv2d: input has ", cin, " channels but kernel ",
                         "expects ", kernel.dim(1)));
  if (bias.dim(0) != cout)
    throw ShapeError(cat("conv2d: bias size ", bias.dim(0),
                         " does not match ", cout, " output channels"));
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (pad < 0) throw ShapeError("conv2d: pad must be >= 0");
  if (k > h + 2 * pad || k > w + 2 * pad)
    throw ShapeError(cat("conv2d: kernel size ", k,
                         " exceeds padded input ", h + 2 * pad, "x",
                         w + 2 * pad));
  const int hout = (h + 2 * pad - k) / stride + 1;
  const int wout = (w + 2 * pad - k) / stride + 1;
  const kernels::ConvDims dims{b, cin, h, w, cout, k, stride, pad, hout, wout};

  Tensor out = Tensor::zeros({b, cout, hout, wout});
  table().conv2d_fwd(input.data(), kernel.data(), bias.data(), out.data(),
                     dims);
  auto ii = input.impl(), ki = kernel.impl(), bi = bias.impl();
  detail::record(out, "conv2d", {input, kernel, bias},
                 [ii, ki, bi, dims](TensorImpl& o) {
                   if (ii->requires_grad) {
                     ii->ensure_grad();
                     table().conv2d_bwd_input(o.grad.data(), ki->data.data(),
                                              ii->grad.data(), dims);
                   }
                   const bool want_k = ki->requires_grad;
                   const bool want_b = bi->requires_grad;
                   if (want_k || want_b) {
                     if (want_k) ki->ensure_grad();
                     if (want_b) bi->ensure_grad();
                     // A null gk is not supported by the kernel; use a
                     // scratch buffer when only the bias needs gradient.
                     std::vector<double> scratch;
                     double* gk = nullptr;
                     if (want_k) {
                       gk = ki->grad.data();
                     } else {
                       scratch.assign(ki->data.size(), 0.0);
                       gk = scratch.data();
                     }
                     table().conv2d_bwd_kernel(
                         ii->data.data(), o.grad.data(), gk,
                         want_b ? bi->grad.data() : nullptr, dims);
                     if (want_k && conv_tamper_enabled())
                       table().scale(ki->grad.data(), 1.01, ki->grad.data(),
                                     ki->grad.size());
                   }
                 });
  return out;
}

Tensor maxpool2(const Tensor& input) {
  check_rank("maxpool2", input, 4);
  const auto b = input.dim(0), c = input.dim(1), h = input.dim(2),
             w = input.dim(3);
  if (h % 2 != 0 || w % 2 != 0)
    throw ShapeError(cat("maxpool2: H and W must be even, got ",
                         shape_str(input.shape())));
  const auto ho = h / 2, wo = w / 2;
  Tensor out = Tensor::zeros({b, c, ho, wo});
  auto indices = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(out.numel()));
  const double* in = input.data();
  double* op = out.data();
  std::size_t oi = 0;
  for (std::int64_t bc = 0; bc < b * c; ++bc) {
    const double* plane = in + bc * h * w;
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      for (std::int64_t ox = 0; ox < wo; ++ox, ++oi) {
        // First (row-major) occurrence wins ties.
        std::int64_t best = 2 * oy * w + 2 * ox;
        double bv = plane[best];
        const std::int64_t cand[3] = {2 * oy * w + 2 * ox + 1,
                                      (2 * oy + 1) * w + 2 * ox,
                                      (2 * oy + 1) * w + 2 * ox + 1};
        for (auto idx : cand) {
          if (plane[idx] > bv) {
            bv = plane[idx];
            best = idx;
          }
        }
        op[oi] = bv;
        (*indices)[oi] = bc * h * w + best;
      }
    }
  }
  auto ii = input.impl();
  detail::record(out, "maxpool2", {input}, [ii, indices](TensorImpl& o) {
    ii->ensure_grad();
    for (std::size_t i = 0; i < indices->size(); ++i)
      ii->grad[static_cast<std::size_t>((*indices)[i])] += o.grad[i];
  });
  return out;
}

namespace {
// align-corners=false x2 mapping: output o samples input at o/2 - 0.25.
struct LerpIdx {
  std::int64_t i0, i1;
  double w;  // weight of i1
};
std::vector<LerpIdx> upsample_map(std::int64_t in_size) {
  std::vector<LerpIdx> m(static_cast<std::size_t>(2 * in_size));
  for (std::int64_t o = 0; o < 2 * in_size; ++o) {
    const double src = 0.5 * static_cast<double>(o) - 0.25;
    double fl = std::floor(src);
    std::int64_t i0 = static_cast<std::int64_t>(fl);
    double w = src - fl;
    if (i0 < 0) {
      i0 = 0;
      w = 0.0;
    }
    std::int64_t i1 = i0 + 1;
    if (i1 > in_size - 1) {
      i1 = in_size - 1;
      w = 0.0;
    }
    m[static_cast<std::size_t>(o)] = {i0, i1, w};
  }
  return m;
}
}  // namespace

Tensor upsample_bilinear2(const Tensor& input) {
  check_rank("upsample_bilinear2", input, 4);
  const auto b = input.dim(0), c = input.dim(1), h = input.dim(2),
             w = input.dim(3);
  const auto ho = 2 * h, wo = 2 * w;
  Tensor out = Tensor::zeros({b, c, ho, wo});
  const auto ymap = upsample_map(h);
  const auto xmap = upsample_map(w);
  const double* in = input.data();
  double* op = out.data();
  for (std::int64_t bc = 0; bc < b * c; ++bc) {
    const double* plane = in + bc * h * w;
    double* oplane = op + bc * ho * wo;
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      const auto& my = ymap[static_cast<std::size_t>(oy)];
      const double* r0 = plane + my.i0 * w;
      const double* r1 = plane + my.i1 * w;
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        const auto& mx = xmap[static_cast<std::size_t>(ox)];
        // lerp form keeps constant inputs exactly constant
        const double a = r0[mx.i0] + mx.w * (r0[mx.i1] - r0[mx.i0]);
        const double d = r1[mx.i0] + mx.w * (r1[mx.i1] - r1[mx.i0]);
        oplane[oy * wo + ox] = a + my.w * (d - a);
      }
    }
  }
  auto ii = input.impl();
  detail::record(
      out, "upsample_bilinear2", {input},
      [ii, ymap, xmap, b, c, h, w, ho, wo](TensorImpl& o) {
        ii->ensure_grad();
        double* gin = ii->grad.data();
        const double* gy = o.grad.data();
        for (std::int64_t bc = 0; bc < b * c; ++bc) {
          double* gplane = gin + bc * h * w;
          const double* goplane = gy + bc * ho * wo;
          for (std::int64_t oy = 0; oy < ho; ++oy) {
            const auto& my = ymap[static_cast<std::size_t>(oy)];
            for (std::int64_t ox = 0; ox < wo; ++ox) {
              const auto& mx = xmap[static_cast<std::size_t>(ox)];
              const double g = goplane[oy * wo + ox];
              gplane[my.i0 * w + mx.i0] += (1.0 - my.w) * (1.0 - mx.w) * g;
              gplane[my.i0 * w + mx.i1] += (1.0 - my.w) * mx.w * g;
              gplane[my.i1 * w + mx.i0] += my.w * (1.0 - mx.w) * g;
              gplane[my.i1 * w + mx.i1] += my.w * mx.w * g;
            }
          }
        }
      });
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  check_rank("concat_channels", a, 4);
  check_rank("concat_channels", b, 4);
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw ShapeError(cat("concat_channels: batch/spatial mismatch ",
                         shape_str(a.shape()), " vs ", shape_str(b.shape())));
  const auto n = a.dim(0), c1 = a.dim(1), c2 = b.dim(1), h = a.dim(2),
             w = a.dim(3);
  Tensor out = Tensor::zeros({n, c1 + c2, h, w});
  const auto plane = static_cast<std::size_t>(h * w);
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(a.data() + i * c1 * plane, c1 * plane,
                out.data() + i * (c1 + c2) * plane);
    std::copy_n(b.data() + i * c2 * plane, c2 * plane,
                out.data() + (i * (c1 + c2) + c1) * plane);
  }
  auto ai = a.impl(), bi = b.impl();
  detail::record(out, "concat_channels", {a, b},
                 [ai, bi, n, c1, c2, plane](TensorImpl& o) {
                   for (std::int64_t i = 0; i < n; ++i) {
                     const double* g = o.grad.data() + i * (c1 + c2) * plane;
                     if (ai->requires_grad) {
                       ai->ensure_grad();
                       table().axpy(1.0, g,
                                    ai->grad.data() + i * c1 * plane,
                                    static_cast<std::size_t>(c1) * plane);
                     }
                     if (bi->requires_grad) {
                       bi->ensure_grad();
                       table().axpy(1.0, g + c1 * plane,
                                    bi->grad.data() + i * c2 * plane,
                                    static_cast<std::size_t>(c2) * plane);
                     }
                   }
                 });
  return out;
}

namespace {
struct ReducePlan {
  std::vector<std::int64_t> out_shape;
  std::vector<std::size_t> out_index;  // flat input idx -> flat output idx
  std::int64_t count;                  // elements reduced per output
};

ReducePlan plan_reduce(const Tensor& a, std::vector<int> axes) {
  const auto& sh = a.shape();
  const int rank = static_cast<int>(sh.size());
  if (axes.empty()) {
    for (int i = 0; i < rank; ++i) axes.push_back(i);
  }
  std::sort(axes.begin(), axes.end());
  axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
  std::vector<bool> reduced(static_cast<std::size_t>(rank), false);
  for (int ax : axes) {
    if (ax < 0 || ax >= rank)
      throw ShapeError(cat("reduce: axis ", ax, " invalid for rank ", rank));
    reduced[static_cast<std::size_t>(ax)] = true;
  }
  ReducePlan plan;
  plan.count = 1;
  for (int i = 0; i < rank; ++i) {
    if (reduced[static_cast<std::size_t>(i)])
      plan.count *= sh[static_cast<std::size_t>(i)];
    else
      plan.out_shape.push_back(sh[static_cast<std::size_t>(i)]);
  }
  if (plan.out_shape.empty()) plan.out_shape.push_back(1);

  const auto n = static_cast<std::size_t>(a.numel());
  plan.out_index.resize(n);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(rank), 0);
  std::size_t out_flat = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    // Recompute the output index incrementally-free; n stays desk-scale.
    out_flat = 0;
    for (int i = 0; i < rank; ++i)
      if (!reduced[static_cast<std::size_t>(i)])
        out_flat = out_flat * static_cast<std::size_t>(
                                  sh[static_cast<std::size_t>(i)]) +
                   static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]);
    plan.out_index[flat] = out_flat;
    for (int i = rank - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] <
          sh[static_cast<std::size_t>(i)])
        break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
  return plan;
}

Tensor reduce_impl(const Tensor& a, const std::vector<int>& axes,
                   bool mean) {
  // Fast path: full reduction.
  const int rank = static_cast<int>(a.shape().size());
  bool full = axes.empty();
  if (!full) {
    std::vector<int> s(axes);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    full = static_cast<int>(s.size()) == rank;
    for (int ax : s)
      if (ax < 0 || ax >= rank)
        throw ShapeError(cat("reduce: axis ", ax, " invalid for rank ",
                             rank));
  }
  const auto n = static_cast<std::size_t>(a.numel());
  if (full) {
    double s = table().reduce_sum(a.data(), n);
    const double factor = mean ? 1.0 / static_cast<double>(n) : 1.0;
    Tensor out = Tensor::from_data({1}, {mean ? s * factor : s});
    auto ai = a.impl();
    detail::record(out, mean ? "reduce_mean" : "reduce_sum", {a},
                   [ai, n, factor](TensorImpl& o) {
                     ai->ensure_grad();
                     const double g = o.grad[0] * factor;
                     for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g;
                   });
    return out;
  }

  auto plan = std::make_shared<ReducePlan>(plan_reduce(a, axes));
  Tensor out = Tensor::zeros(plan->out_shape);
  const double* in = a.data();
  double* op = out.data();
  for (std::size_t i = 0; i < n; ++i) op[plan->out_index[i]] += in[i];
  const double factor = mean ? 1.0 / static_cast<double>(plan->count) : 1.0;
  if (mean)
    table().scale(op, factor, op, static_cast<std::size_t>(out.numel()));
  auto ai = a.impl();
  detail::record(out, mean ? "reduce_mean" : "reduce_sum", {a},
                 [ai, plan, n, factor](TensorImpl& o) {
                   ai->ensure_grad();
                   for (std::size_t i = 0; i < n; ++i)
                     ai->grad[i] += o.grad[plan->out_index[i]] * factor;
                 });
  return out;
}
}  // namespace

Tensor reduce_sum(const Tensor& a, const std::vector<int>& axes) {
  return reduce_impl(a, axes, false);
}

Tensor reduce_mean(const Tensor& a, const std::vector<int>& axes) {
  return reduce_impl(a, axes, true);
}

Tensor reshape(const Tensor& a, std::vector<std::int64_t> new_shape) {
  const auto n = detail::checked_numel(new_shape);
  if (n != a.numel())
    throw ShapeError(cat("reshape: cannot view ", shape_str(a.shape()),
                         " as ", shape_str(new_shape)));
  Tensor out = detail::make_tensor(std::move(new_shape),
                                   std::vector<double>(a.values()));
  auto ai = a.impl();
  detail::record(out, "reshape", {a}, [ai, n](TensorImpl& o) {
    accum(*ai, o.grad.data(), static_cast<std::size_t>(n));
  });
  return out;
}

Tensor transpose2d(const Tensor& a) {
  check_rank("transpose2d", a, 2);
  const auto m = a.dim(0), n = a.dim(1);
  Tensor out = Tensor::zeros({n, m});
  transpose_copy(a.data(), out.data(), m, n);
  auto ai = a.impl();
  detail::record(out, "transpose2d", {a}, [ai, m, n](TensorImpl& o) {
    ai->ensure_grad();
    // gradient of transpose is transpose of gradient (accumulated)
    for (std::int64_t r = 0; r < n; ++r)
      for (std::int64_t c = 0; c < m; ++c)
        ai->grad[static_cast<std::size_t>(c * n + r)] +=
            o.grad[static_cast<std::size_t>(r * m + c)];
  });
  return out;
}

Tensor select_batch(const Tensor& a, std::int64_t index) {
  if (a.rank() < 1) throw ShapeError("select_batch: rank-0 tensor");
  if (index < 0 || index >= a.dim(0))
    throw ShapeError(cat("select_batch: index ", index, " out of range [0,",
                         a.dim(0), ")"));
  std::vector<std::int64_t> out_shape = a.shape();
  out_shape[0] = 1;
  const auto slice = static_cast<std::size_t>(a.numel() / a.dim(0));
  std::vector<double> data(slice);
  std::copy_n(a.data() + static_cast<std::size_t>(index) * slice, slice,
              data.data());
  Tensor out = detail::make_tensor(std::move(out_shape), std::move(data));
  auto ai = a.impl();
  detail::record(out, "select_batch", {a}, [ai, index, slice](TensorImpl& o) {
    ai->ensure_grad();
    table().axpy(1.0, o.grad.data(),
                 ai->grad.data() + static_cast<std::size_t>(index) * slice,
                 slice);
  });
  return out;
}

Tensor stack_batch(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("stack_batch: no parts");
  const auto& first = parts.front().shape();
  if (first.empty() || first[0] != 1)
    throw ShapeError("stack_batch: parts must have leading dimension 1");
  for (const auto& p : parts)
    if (p.shape() != first)
      throw ShapeError(cat("stack_batch: part shape ", shape_str(p.shape()),
                           " differs from ", shape_str(first)));
  std::vector<std::int64_t> out_shape = first;
  out_shape[0] = static_cast<std::int64_t>(parts.size());
  const auto slice = static_cast<std::size_t>(parts.front().numel());
  Tensor out = Tensor::zeros(out_shape);
  for (std::size_t i = 0; i < parts.size(); ++i)
    std::copy_n(parts[i].data(), slice, out.data() + i * slice);

  bool needs = false;
  for (const auto& p : parts) needs = needs || p.requires_grad();
  if (grad_enabled() && needs) {
    auto node = std::make_shared<Node>();
    node->op = "stack_batch";
    std::vector<std::shared_ptr<TensorImpl>> impls;
    impls.reserve(parts.size());
    for (const auto& p : parts) {
      node->inputs.push_back(p.impl());
      impls.push_back(p.impl());
    }
    node->backward = [impls, slice](TensorImpl& o) {
      for (std::size_t i = 0; i < impls.size(); ++i) {
        if (!impls[i]->requires_grad) continue;
        impls[i]->ensure_grad();
        table().axpy(1.0, o.grad.data() + i * slice, impls[i]->grad.data(),
                     slice);
      }
    };
    out.impl()->node = std::move(node);
    out.impl()->requires_grad = true;
  }
  return out;
}

Tensor mul_spatial_weight(const Tensor& x, const Tensor& w) {
  check_rank("mul_spatial_weight", x, 4);
  check_rank("mul_spatial_weight", w, 3);
  if (w.dim(0) != 1 || w.dim(1) != x.dim(2) || w.dim(2) != x.dim(3))
    throw ShapeError(cat("mul_spatial_weight: weight ", shape_str(w.shape()),
                         " does not match features ", shape_str(x.shape())));
  const auto b = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const auto plane = static_cast<std::size_t>(h * ww);
  Tensor out = like(x);
  for (std::int64_t bc = 0; bc < b * c; ++bc)
    table().mul(x.data() + bc * plane, w.data(), out.data() + bc * plane,
                plane);
  auto xi = x.impl(), wi = w.impl();
  detail::record(out, "mul_spatial_weight", {x, w},
                 [xi, wi, b, c, plane](TensorImpl& o) {
                   if (xi->requires_grad) {
                     xi->ensure_grad();
                     for (std::int64_t bc = 0; bc < b * c; ++bc)
                       table().fma_acc(wi->data.data(),
                                       o.grad.data() + bc * plane,
                                       xi->grad.data() + bc * plane, plane);
                   }
                   if (wi->requires_grad) {
                     wi->ensure_grad();
                     for (std::int64_t bc = 0; bc < b * c; ++bc)
                       table().fma_acc(xi->data.data() + bc * plane,
                                       o.grad.data() + bc * plane,
                                       wi->grad.data(), plane);
                   }
                 });
  return out;
}

Tensor channel_l2(const Tensor& a, const Tensor& b) {
  check_rank("channel_l2", a, 4);
  check_same_shape("channel_l2", a, b);
  const auto n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  const auto plane = static_cast<std::size_t>(h * w);
  Tensor out = Tensor::zeros({n, h, w});
  const double* ap = a.data();
  const double* bp = b.data();
  double* op = out.data();
  for (std::int64_t bi = 0; bi < n; ++bi) {
    const double* ab = ap + bi * c * plane;
    const double* bb = bp + bi * c * plane;
    double* ob = op + bi * plane;
    for (std::size_t px = 0; px < plane; ++px) {
      double s = 0.0;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double d = ab[ch * plane + px] - bb[ch * plane + px];
        s = std::fma(d, d, s);
      }
      ob[px] = std::sqrt(s);
    }
  }
  auto ai = a.impl(), bi2 = b.impl();
  detail::record(
      out, "channel_l2", {a, b}, [ai, bi2, n, c, plane](TensorImpl& o) {
        const bool wa = ai->requires_grad, wb = bi2->requires_grad;
        if (wa) ai->ensure_grad();
        if (wb) bi2->ensure_grad();
        for (std::int64_t bi = 0; bi < n; ++bi) {
          const double* ab = ai->data.data() + bi * c * plane;
          const double* bb = bi2->data.data() + bi * c * plane;
          const double* dist = o.data.data() + bi * plane;
          const double* g = o.grad.data() + bi * plane;
          for (std::size_t px = 0; px < plane; ++px) {
            if (dist[px] == 0.0) continue;  // subgradient 0 at the cusp
            const double s = g[px] / dist[px];
            for (std::int64_t ch = 0; ch < c; ++ch) {
              const double d = ab[ch * plane + px] - bb[ch * plane + px];
              if (wa) ai->grad[bi * c * plane + ch * plane + px] += s * d;
              if (wb) bi2->grad[bi * c * plane + ch * plane + px] -= s * d;
            }
          }
        }
      });
  return out;
}

}  // namespace ducd
