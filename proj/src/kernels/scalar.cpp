// Portable reference kernels. These define the numerical semantics the
// AVX2 variants must reproduce; accumulation loops use std::fma so fused
// vector arithmetic matches bitwise.

#include <cmath>
#include <cstddef>
#include <vector>

#include "ducd/kernels/api.hpp"
#include "ducd/kernels/exp_core.hpp"

namespace ducd::kernels {
namespace {

void s_add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void s_sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void s_mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void s_abs(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(a[i]);
}
void s_relu(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}
void s_scale(const double* a, double c, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * c;
}
void s_vexp(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = exp_one(a[i]);
}
void s_sigmoid(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid_one(a[i]);
}

void s_axpy(double c, const double* x, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] = std::fma(c, x[i], acc[i]);
}
void s_fma_acc(const double* a, const double* b, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] = std::fma(a[i], b[i], acc[i]);
}
void s_relu_bwd(const double* x, const double* g, double* acc,
                std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0) acc[i] += g[i];
}
void s_abs_bwd(const double* x, const double* g, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0)
      acc[i] += g[i];
    else if (x[i] < 0.0)
      acc[i] -= g[i];
  }
}
void s_sigmoid_bwd(const double* y, const double* g, double* acc,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    acc[i] = std::fma(y[i] * (1.0 - y[i]), g[i], acc[i]);
}

// C[m,n] accumulates over k in index order; each output element sees the
// same fma sequence as the vector backend.
void s_matmul(const double* a, const double* b, double* c, int m, int k,
              int n, bool accumulate) {
  if (!accumulate) {
    for (int i = 0; i < m * n; ++i) c[i] = 0.0;
  }
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = a[static_cast<std::size_t>(i) * k + p];
      const double* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

void s_conv2d_fwd(const double* in, const double* kernel, const double* bias,
                  double* out, const ConvDims& d) {
  const std::size_t in_plane = static_cast<std::size_t>(d.h) * d.w;
  const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;
  for (int b = 0; b < d.batch; ++b) {
    const double* inb = in + b * in_plane * d.cin;
    double* outb = out + b * out_plane * d.cout;
    for (int co = 0; co < d.cout; ++co) {
      double* op = outb + co * out_plane;
      const double* kc =
          kernel + static_cast<std::size_t>(co) * d.cin * d.k * d.k;
      for (int oy = 0; oy < d.hout; ++oy) {
        for (int ox = 0; ox < d.wout; ++ox) {
          double acc = bias != nullptr ? bias[co] : 0.0;
          for (int ci = 0; ci < d.cin; ++ci) {
            const double* ip = inb + ci * in_plane;
            const double* kk = kc + static_cast<std::size_t>(ci) * d.k * d.k;
            for (int kh = 0; kh < d.k; ++kh) {
              const int iy = oy * d.stride - d.pad + kh;
              if (iy < 0 || iy >= d.h) continue;
              for (int kw = 0; kw < d.k; ++kw) {
                const int ix = ox * d.stride - d.pad + kw;
                if (ix < 0 || ix >= d.w) continue;
                acc = std::fma(kk[kh * d.k + kw],
                               ip[static_cast<std::size_t>(iy) * d.w + ix],
                               acc);
              }
            }
          }
          op[static_cast<std::size_t>(oy) * d.wout + ox] = acc;
        }
      }
    }
  }
}

// Gather form: every input pixel accumulates its contributions in
// (co, kh, kw) order, matching the vector backend lane-for-lane.
void s_conv2d_bwd_input(const double* gout, const double* kernel, double* gin,
                        const ConvDims& d) {
  const std::size_t in_plane = static_cast<std::size_t>(d.h) * d.w;
  const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;
  for (int b = 0; b < d.batch; ++b) {
    const double* gob = gout + b * out_plane * d.cout;
    double* gib = gin + b * in_plane * d.cin;
    for (int ci = 0; ci < d.cin; ++ci) {
      double* gp = gib + ci * in_plane;
      for (int iy = 0; iy < d.h; ++iy) {
        for (int ix = 0; ix < d.w; ++ix) {
          double acc = gp[static_cast<std::size_t>(iy) * d.w + ix];
          for (int co = 0; co < d.cout; ++co) {
            const double* gop = gob + co * out_plane;
            const double* kc =
                kernel + (static_cast<std::size_t>(co) * d.cin + ci) * d.k *
                             d.k;
            for (int kh = 0; kh < d.k; ++kh) {
              const int ty = iy + d.pad - kh;
              if (ty < 0 || ty % d.stride != 0) continue;
              const int oy = ty / d.stride;
              if (oy >= d.hout) continue;
              for (int kw = 0; kw < d.k; ++kw) {
                const int tx = ix + d.pad - kw;
                if (tx < 0 || tx % d.stride != 0) continue;
                const int ox = tx / d.stride;
                if (ox >= d.wout) continue;
                acc = std::fma(kc[kh * d.k + kw],
                               gop[static_cast<std::size_t>(oy) * d.wout + ox],
                               acc);
              }
            }
          }
          gp[static_cast<std::size_t>(iy) * d.w + ix] = acc;
        }
      }
    }
  }
}

void s_conv2d_bwd_kernel(const double* in, const double* gout, double* gk,
                         double* gbias, const ConvDims& d) {
  const std::size_t in_plane = static_cast<std::size_t>(d.h) * d.w;
  const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;
  for (int b = 0; b < d.batch; ++b) {
    const double* inb = in + b * in_plane * d.cin;
    const double* gob = gout + b * out_plane * d.cout;
    for (int co = 0; co < d.cout; ++co) {
      const double* gop = gob + co * out_plane;
      if (gbias != nullptr) {
        double acc = 0.0;
        for (std::size_t i = 0; i < out_plane; ++i) acc += gop[i];
        gbias[co] += acc;
      }
      for (int ci = 0; ci < d.cin; ++ci) {
        const double* ip = inb + ci * in_plane;
        double* gkp =
            gk + (static_cast<std::size_t>(co) * d.cin + ci) * d.k * d.k;
        for (int kh = 0; kh < d.k; ++kh) {
          for (int kw = 0; kw < d.k; ++kw) {
            double acc = 0.0;
            for (int oy = 0; oy < d.hout; ++oy) {
              const int iy = oy * d.stride - d.pad + kh;
              if (iy < 0 || iy >= d.h) continue;
              for (int ox = 0; ox < d.wout; ++ox) {
                const int ix = ox * d.stride - d.pad + kw;
                if (ix < 0 || ix >= d.w) continue;
                acc = std::fma(gop[static_cast<std::size_t>(oy) * d.wout + ox],
                               ip[static_cast<std::size_t>(iy) * d.w + ix],
                               acc);
              }
            }
            gkp[kh * d.k + kw] += acc;
          }
        }
      }
    }
  }
}

void s_softmax_fwd(const double* in, double* out, int m, int n) {
  for (int i = 0; i < m; ++i) {
    const double* row = in + static_cast<std::size_t>(i) * n;
    double* orow = out + static_cast<std::size_t>(i) * n;
    double mx = row[0];
    for (int j = 1; j < n; ++j) mx = row[j] > mx ? row[j] : mx;
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      orow[j] = exp_one(row[j] - mx);
      sum += orow[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < n; ++j) orow[j] *= inv;
  }
}

void s_softmax_bwd(const double* y, const double* g, double* gx, int m,
                   int n) {
  for (int i = 0; i < m; ++i) {
    const double* yr = y + static_cast<std::size_t>(i) * n;
    const double* gr = g + static_cast<std::size_t>(i) * n;
    double* xr = gx + static_cast<std::size_t>(i) * n;
    double dot = 0.0;
    for (int j = 0; j < n; ++j) dot = std::fma(gr[j], yr[j], dot);
    for (int j = 0; j < n; ++j)
      xr[j] = std::fma(yr[j], gr[j] - dot, xr[j]);
  }
}

double s_reduce_sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t = {
      "scalar",    s_add,           s_sub,
      s_mul,       s_abs,           s_relu,
      s_scale,     s_vexp,          s_sigmoid,
      s_axpy,      s_fma_acc,       s_relu_bwd,
      s_abs_bwd,   s_sigmoid_bwd,   s_matmul,
      s_conv2d_fwd, s_conv2d_bwd_input, s_conv2d_bwd_kernel,
      s_softmax_fwd, s_softmax_bwd, s_reduce_sum,
  };
  return t;
}

}  // namespace ducd::kernels
