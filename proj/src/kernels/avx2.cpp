// AVX2 kernel variants. Compiled with -mavx2 -mfma; selected at runtime by
// the dispatch layer. Lanes replay the scalar reference's per-output
// accumulation order, so elementwise ops, exp/sigmoid, matmul, conv forward
// and conv input-gradient are bitwise identical to the scalar backend.
// Reduction kernels (kernel/bias gradients, softmax sums) use lane-parallel
// partial sums and agree with the reference to ~1e-13 relative.

#include <cmath>
#include <cstddef>
#include <cstring>
#include <vector>

#include "ducd/kernels/api.hpp"
#include "ducd/kernels/exp_core.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace ducd::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

const __m256d kSignMask = _mm256_set1_pd(-0.0);

void v_add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}
void v_sub(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}
void v_mul(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}
void v_abs(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i,
                     _mm256_andnot_pd(kSignMask, _mm256_loadu_pd(a + i)));
  for (; i < n; ++i) out[i] = std::fabs(a[i]);
}
void v_relu(const double* a, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(a + i), zero));
  for (; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}
void v_scale(const double* a, double c, double* out, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), vc));
  for (; i < n; ++i) out[i] = a[i] * c;
}

// Vector exp: identical step sequence to exp_one (see exp_core.hpp).
// Computes on an input clamped into [kExpLo, kExpHi] (bit manipulation is
// only valid there), then masks under/overflow lanes by the original value.
inline __m256d exp4(__m256d x) {
  const __m256d lo_cut = _mm256_set1_pd(kExpLo);
  const __m256d hi_cut = _mm256_set1_pd(kExpHi);
  const __m256d xc = _mm256_max_pd(lo_cut, _mm256_min_pd(x, hi_cut));

  const __m256d kd =
      _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(kLog2E)),
                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(kd, _mm256_set1_pd(kLn2Hi), xc);
  r = _mm256_fnmadd_pd(kd, _mm256_set1_pd(kLn2Lo), r);

  __m256d p = _mm256_set1_pd(kExpPoly[13]);
  for (int i = 12; i >= 0; --i)
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kExpPoly[i]));

  // 2^k via exponent bits; kd is integral in [-1021, 1023].
  const __m128i k32 = _mm256_cvtpd_epi32(kd);
  const __m256i k64 = _mm256_cvtepi32_epi64(k32);
  const __m256i bits =
      _mm256_slli_epi64(_mm256_add_epi64(k64, _mm256_set1_epi64x(1023)), 52);
  __m256d res = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));

  const __m256d under = _mm256_cmp_pd(x, lo_cut, _CMP_LT_OQ);
  const __m256d over = _mm256_cmp_pd(x, hi_cut, _CMP_GT_OQ);
  res = _mm256_andnot_pd(under, res);
  res = _mm256_blendv_pd(res, _mm256_set1_pd(HUGE_VAL), over);
  return res;
}

void v_vexp(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(a + i)));
  for (; i < n; ++i) out[i] = exp_one(a[i]);
}

void v_sigmoid(const double* a, double* out, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(a + i);
    const __m256d negabs =
        _mm256_or_pd(_mm256_andnot_pd(kSignMask, x), kSignMask);
    const __m256d t = exp4(negabs);
    const __m256d pos = _mm256_div_pd(one, _mm256_add_pd(one, t));
    const __m256d neg = _mm256_div_pd(t, _mm256_add_pd(one, t));
    _mm256_storeu_pd(
        out + i,
        _mm256_blendv_pd(neg, pos,
                         _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_GE_OQ)));
  }
  for (; i < n; ++i) out[i] = sigmoid_one(a[i]);
}

void v_axpy(double c, const double* x, double* acc, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(vc, _mm256_loadu_pd(x + i),
                                              _mm256_loadu_pd(acc + i)));
  for (; i < n; ++i) acc[i] = std::fma(c, x[i], acc[i]);
}
void v_fma_acc(const double* a, const double* b, double* acc, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(acc + i,
                     _mm256_fmadd_pd(_mm256_loadu_pd(a + i),
                                     _mm256_loadu_pd(b + i),
                                     _mm256_loadu_pd(acc + i)));
  for (; i < n; ++i) acc[i] = std::fma(a[i], b[i], acc[i]);
}
void v_relu_bwd(const double* x, const double* g, double* acc,
                std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask =
        _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d a = _mm256_loadu_pd(acc + i);
    const __m256d upd = _mm256_add_pd(a, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(acc + i, _mm256_blendv_pd(a, upd, mask));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) acc[i] += g[i];
}
void v_abs_bwd(const double* x, const double* g, double* acc, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d a = _mm256_loadu_pd(acc + i);
    const __m256d pos = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
    const __m256d neg = _mm256_cmp_pd(xv, zero, _CMP_LT_OQ);
    __m256d r = _mm256_blendv_pd(a, _mm256_sub_pd(a, gv), neg);
    r = _mm256_blendv_pd(r, _mm256_add_pd(a, gv), pos);
    _mm256_storeu_pd(acc + i, r);
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0)
      acc[i] += g[i];
    else if (x[i] < 0.0)
      acc[i] -= g[i];
  }
}
void v_sigmoid_bwd(const double* y, const double* g, double* acc,
                   std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d yv = _mm256_loadu_pd(y + i);
    const __m256d t = _mm256_mul_pd(yv, _mm256_sub_pd(one, yv));
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(t, _mm256_loadu_pd(g + i),
                                              _mm256_loadu_pd(acc + i)));
  }
  for (; i < n; ++i) acc[i] = std::fma(y[i] * (1.0 - y[i]), g[i], acc[i]);
}

// Register-blocked over 16 output columns; per-output accumulation order
// over k matches the scalar reference.
void v_matmul(const double* a, const double* b, double* c, int m, int k,
              int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* crow = c + static_cast<std::size_t>(i) * n;
    int j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256d c0, c1, c2, c3;
      if (accumulate) {
        c0 = _mm256_loadu_pd(crow + j);
        c1 = _mm256_loadu_pd(crow + j + 4);
        c2 = _mm256_loadu_pd(crow + j + 8);
        c3 = _mm256_loadu_pd(crow + j + 12);
      } else {
        c0 = c1 = c2 = c3 = _mm256_setzero_pd();
      }
      for (int p = 0; p < k; ++p) {
        const __m256d av = _mm256_set1_pd(arow[p]);
        const double* brow = b + static_cast<std::size_t>(p) * n + j;
        c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow), c0);
        c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 4), c1);
        c2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 8), c2);
        c3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 12), c3);
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
      _mm256_storeu_pd(crow + j + 8, c2);
      _mm256_storeu_pd(crow + j + 12, c3);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d c0 =
          accumulate ? _mm256_loadu_pd(crow + j) : _mm256_setzero_pd();
      for (int p = 0; p < k; ++p)
        c0 = _mm256_fmadd_pd(
            _mm256_set1_pd(arow[p]),
            _mm256_loadu_pd(b + static_cast<std::size_t>(p) * n + j), c0);
      _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < n; ++j) {
      double acc = accumulate ? crow[j] : 0.0;
      for (int p = 0; p < k; ++p)
        acc = std::fma(arow[p], b[static_cast<std::size_t>(p) * n + j], acc);
      crow[j] = acc;
    }
  }
}

// Scratch buffers for padded planes, reused across calls.
thread_local std::vector<double> tl_pad;

// Copy one image's planes into a zero-padded buffer [c][h+2p][w+2p].
void pad_planes(const double* src, int c, int h, int w, int pad,
                std::vector<double>& dst) {
  const int hp = h + 2 * pad;
  const int wp = w + 2 * pad;
  dst.assign(static_cast<std::size_t>(c) * hp * wp, 0.0);
  for (int ci = 0; ci < c; ++ci) {
    const double* sp = src + static_cast<std::size_t>(ci) * h * w;
    double* dp = dst.data() + static_cast<std::size_t>(ci) * hp * wp;
    for (int y = 0; y < h; ++y)
      std::memcpy(dp + static_cast<std::size_t>(y + pad) * wp + pad,
                  sp + static_cast<std::size_t>(y) * w,
                  static_cast<std::size_t>(w) * sizeof(double));
  }
}

void v_conv2d_fwd(const double* in, const double* kernel, const double* bias,
                  double* out, const ConvDims& d) {
  if (d.stride != 1) {
    scalar_table().conv2d_fwd(in, kernel, bias, out, d);
    return;
  }
  const int hp = d.h + 2 * d.pad;
  const int wp = d.w + 2 * d.pad;
  const std::size_t in_plane = static_cast<std::size_t>(d.h) * d.w;
  const std::size_t pad_plane = static_cast<std::size_t>(hp) * wp;
  const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;
  const std::size_t ksz = static_cast<std::size_t>(d.k) * d.k;

  for (int b = 0; b < d.batch; ++b) {
    pad_planes(in + b * in_plane * d.cin, d.cin, d.h, d.w, d.pad, tl_pad);
    const double* pin = tl_pad.data();
    double* outb = out + b * out_plane * d.cout;
    for (int co = 0; co < d.cout; ++co) {
      const double* kc = kernel + static_cast<std::size_t>(co) * d.cin * ksz;
      const double bv = bias != nullptr ? bias[co] : 0.0;
      double* op = outb + co * out_plane;
      for (int oy = 0; oy < d.hout; ++oy) {
        double* orow = op + static_cast<std::size_t>(oy) * d.wout;
        int ox = 0;
        for (; ox + 16 <= d.wout; ox += 16) {
          __m256d a0 = _mm256_set1_pd(bv);
          __m256d a1 = a0, a2 = a0, a3 = a0;
          for (int ci = 0; ci < d.cin; ++ci) {
            const double* ip = pin + ci * pad_plane;
            const double* kk = kc + ci * ksz;
            for (int kh = 0; kh < d.k; ++kh) {
              const double* irow =
                  ip + static_cast<std::size_t>(oy + kh) * wp + ox;
              for (int kw = 0; kw < d.k; ++kw) {
                const __m256d wv = _mm256_set1_pd(kk[kh * d.k + kw]);
                a0 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(irow + kw), a0);
                a1 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(irow + kw + 4), a1);
                a2 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(irow + kw + 8), a2);
                a3 = _mm256_fmadd_pd(wv, _mm256_loadu_pd(irow + kw + 12), a3);
              }
            }
          }
          _mm256_storeu_pd(orow + ox, a0);
          _mm256_storeu_pd(orow + ox + 4, a1);
          _mm256_storeu_pd(orow + ox + 8, a2);
          _mm256_storeu_pd(orow + ox + 12, a3);
        }
        for (; ox + 4 <= d.wout; ox += 4) {
          __m256d a0 = _mm256_set1_pd(bv);
          for (int ci = 0; ci < d.cin; ++ci) {
            const double* ip = pin + ci * pad_plane;
            const double* kk = kc + ci * ksz;
            for (int kh = 0; kh < d.k; ++kh) {
              const double* irow =
                  ip + static_cast<std::size_t>(oy + kh) * wp + ox;
              for (int kw = 0; kw < d.k; ++kw)
                a0 = _mm256_fmadd_pd(_mm256_set1_pd(kk[kh * d.k + kw]),
                                     _mm256_loadu_pd(irow + kw), a0);
            }
          }
          _mm256_storeu_pd(orow + ox, a0);
        }
        for (; ox < d.wout; ++ox) {
          double acc = bv;
          for (int ci = 0; ci < d.cin; ++ci) {
            const double* ip = pin + ci * pad_plane;
            const double* kk = kc + ci * ksz;
            for (int kh = 0; kh < d.k; ++kh)
              for (int kw = 0; kw < d.k; ++kw)
                acc = std::fma(
                    kk[kh * d.k + kw],
                    ip[static_cast<std::size_t>(oy + kh) * wp + ox + kw], acc);
          }
          orow[ox] = acc;
        }
      }
    }
  }
}

void v_conv2d_bwd_input(const double* gout, const double* kernel, double* gin,
                        const ConvDims& d) {
  if (d.stride != 1) {
    scalar_table().conv2d_bwd_input(gout, kernel, gin, d);
    return;
  }
  // Full-correlation form: pad gout by (k-1-pad) and gather per input pixel
  // in (co, kh, kw) order, identical to the scalar reference.
  const int q = d.k - 1 - d.pad;
  if (q < 0) {
    scalar_table().conv2d_bwd_input(gout, kernel, gin, d);
    return;
  }
  const int hp = d.hout + 2 * q;
  const int wp = d.wout + 2 * q;
  const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;
  const std::size_t pad_plane = static_cast<std::size_t>(hp) * wp;
  const std::size_t in_plane = static_cast<std::size_t>(d.h) * d.w;
  const std::size_t ksz = static_cast<std::size_t>(d.k) * d.k;

  for (int b = 0; b < d.batch; ++b) {
    pad_planes(gout + b * out_plane * d.cout, d.cout, d.hout, d.wout, q,
               tl_pad);
    const double* pg = tl_pad.data();
    double* gib = gin + b * in_plane * d.cin;
    for (int ci = 0; ci < d.cin; ++ci) {
      double* gp = gib + ci * in_plane;
      for (int iy = 0; iy < d.h; ++iy) {
        double* grow = gp + static_cast<std::size_t>(iy) * d.w;
        int ix = 0;
        for (; ix + 4 <= d.w; ix += 4) {
          __m256d a0 = _mm256_loadu_pd(grow + ix);
          for (int co = 0; co < d.cout; ++co) {
            const double* gpp = pg + co * pad_plane;
            const double* kc =
                kernel + (static_cast<std::size_t>(co) * d.cin + ci) * ksz;
            for (int kh = 0; kh < d.k; ++kh) {
              // oy = iy + pad - kh, shifted into the padded buffer by q.
              const double* prow =
                  gpp + static_cast<std::size_t>(iy + d.pad - kh + q) * wp;
              for (int kw = 0; kw < d.k; ++kw)
                a0 = _mm256_fmadd_pd(
                    _mm256_set1_pd(kc[kh * d.k + kw]),
                    _mm256_loadu_pd(prow + ix + d.pad - kw + q), a0);
            }
          }
          _mm256_storeu_pd(grow + ix, a0);
        }
        for (; ix < d.w; ++ix) {
          double acc = grow[ix];
          for (int co = 0; co < d.cout; ++co) {
            const double* gpp = pg + co * pad_plane;
            const double* kc =
                kernel + (static_cast<std::size_t>(co) * d.cin + ci) * ksz;
            for (int kh = 0; kh < d.k; ++kh)
              for (int kw = 0; kw < d.k; ++kw)
                acc = std::fma(
                    kc[kh * d.k + kw],
                    gpp[static_cast<std::size_t>(iy + d.pad - kh + q) * wp +
                        ix + d.pad - kw + q],
                    acc);
          }
          grow[ix] = acc;
        }
      }
    }
  }
}

void v_conv2d_bwd_kernel(const double* in, const double* gout, double* gk,
                         double* gbias, const ConvDims& d) {
  if (d.stride != 1 || d.k > 4) {
    scalar_table().conv2d_bwd_kernel(in, gout, gk, gbias, d);
    return;
  }
  const int hp = d.h + 2 * d.pad;
  const int wp = d.w + 2 * d.pad;
  const std::size_t in_plane = static_cast<std::size_t>(d.h) * d.w;
  const std::size_t pad_plane = static_cast<std::size_t>(hp) * wp;
  const std::size_t out_plane = static_cast<std::size_t>(d.hout) * d.wout;
  const std::size_t ksz = static_cast<std::size_t>(d.k) * d.k;

  thread_local std::vector<double> tl_pad_in;
  __m256d acc[16];

  for (int b = 0; b < d.batch; ++b) {
    pad_planes(in + b * in_plane * d.cin, d.cin, d.h, d.w, d.pad, tl_pad_in);
    const double* pin = tl_pad_in.data();
    const double* gob = gout + b * out_plane * d.cout;
    for (int co = 0; co < d.cout; ++co) {
      const double* gop = gob + co * out_plane;
      if (gbias != nullptr) {
        __m256d bs = _mm256_setzero_pd();
        std::size_t i = 0;
        for (; i + 4 <= out_plane; i += 4)
          bs = _mm256_add_pd(bs, _mm256_loadu_pd(gop + i));
        double bd = hsum(bs);
        for (; i < out_plane; ++i) bd += gop[i];
        gbias[co] += bd;
      }
      for (int ci = 0; ci < d.cin; ++ci) {
        const double* ip = pin + ci * pad_plane;
        const int nk = static_cast<int>(ksz);
        for (int t = 0; t < nk; ++t) acc[t] = _mm256_setzero_pd();
        for (int oy = 0; oy < d.hout; ++oy) {
          const double* grow = gop + static_cast<std::size_t>(oy) * d.wout;
          int ox = 0;
          for (; ox + 4 <= d.wout; ox += 4) {
            const __m256d gv = _mm256_loadu_pd(grow + ox);
            for (int kh = 0; kh < d.k; ++kh) {
              const double* irow =
                  ip + static_cast<std::size_t>(oy + kh) * wp + ox;
              for (int kw = 0; kw < d.k; ++kw)
                acc[kh * d.k + kw] = _mm256_fmadd_pd(
                    gv, _mm256_loadu_pd(irow + kw), acc[kh * d.k + kw]);
            }
          }
          if (ox < d.wout) {
            for (int kh = 0; kh < d.k; ++kh) {
              const double* irow =
                  ip + static_cast<std::size_t>(oy + kh) * wp;
              for (int kw = 0; kw < d.k; ++kw) {
                double s = 0.0;
                for (int x2 = ox; x2 < d.wout; ++x2)
                  s = std::fma(grow[x2], irow[x2 + kw], s);
                // Fold the row tail into lane 0.
                acc[kh * d.k + kw] = _mm256_add_pd(
                    acc[kh * d.k + kw], _mm256_set_pd(0.0, 0.0, 0.0, s));
              }
            }
          }
        }
        double* gkp = gk + (static_cast<std::size_t>(co) * d.cin + ci) * ksz;
        for (int t = 0; t < nk; ++t) gkp[t] += hsum(acc[t]);
      }
    }
  }
}

void v_softmax_fwd(const double* in, double* out, int m, int n) {
  for (int i = 0; i < m; ++i) {
    const double* row = in + static_cast<std::size_t>(i) * n;
    double* orow = out + static_cast<std::size_t>(i) * n;
    // max is exact, so any evaluation order gives the scalar result
    __m256d vmax = _mm256_set1_pd(row[0]);
    int j = 0;
    for (; j + 4 <= n; j += 4)
      vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(row + j));
    double mx = row[0];
    {
      double lanes[4];
      _mm256_storeu_pd(lanes, vmax);
      for (double v : lanes) mx = v > mx ? v : mx;
    }
    for (; j < n; ++j) mx = row[j] > mx ? row[j] : mx;

    const __m256d vmx = _mm256_set1_pd(mx);
    __m256d vsum = _mm256_setzero_pd();
    j = 0;
    for (; j + 4 <= n; j += 4) {
      const __m256d e = exp4(_mm256_sub_pd(_mm256_loadu_pd(row + j), vmx));
      _mm256_storeu_pd(orow + j, e);
      vsum = _mm256_add_pd(vsum, e);
    }
    double sum = hsum(vsum);
    for (; j < n; ++j) {
      orow[j] = exp_one(row[j] - mx);
      sum += orow[j];
    }
    const double inv = 1.0 / sum;
    v_scale(orow, inv, orow, static_cast<std::size_t>(n));
  }
}

void v_softmax_bwd(const double* y, const double* g, double* gx, int m,
                   int n) {
  for (int i = 0; i < m; ++i) {
    const double* yr = y + static_cast<std::size_t>(i) * n;
    const double* gr = g + static_cast<std::size_t>(i) * n;
    double* xr = gx + static_cast<std::size_t>(i) * n;
    __m256d vdot = _mm256_setzero_pd();
    int j = 0;
    for (; j + 4 <= n; j += 4)
      vdot = _mm256_fmadd_pd(_mm256_loadu_pd(gr + j),
                             _mm256_loadu_pd(yr + j), vdot);
    double dot = hsum(vdot);
    for (; j < n; ++j) dot = std::fma(gr[j], yr[j], dot);

    const __m256d vd = _mm256_set1_pd(dot);
    j = 0;
    for (; j + 4 <= n; j += 4) {
      const __m256d t = _mm256_sub_pd(_mm256_loadu_pd(gr + j), vd);
      _mm256_storeu_pd(xr + j, _mm256_fmadd_pd(_mm256_loadu_pd(yr + j), t,
                                               _mm256_loadu_pd(xr + j)));
    }
    for (; j < n; ++j) xr[j] = std::fma(yr[j], gr[j] - dot, xr[j]);
  }
}

double v_reduce_sum(const double* a, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_add_pd(s0, _mm256_loadu_pd(a + i));
    s1 = _mm256_add_pd(s1, _mm256_loadu_pd(a + i + 4));
  }
  double acc = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) acc += a[i];
  return acc;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable t = {
      "avx2",      v_add,           v_sub,
      v_mul,       v_abs,           v_relu,
      v_scale,     v_vexp,          v_sigmoid,
      v_axpy,      v_fma_acc,       v_relu_bwd,
      v_abs_bwd,   v_sigmoid_bwd,   v_matmul,
      v_conv2d_fwd, v_conv2d_bwd_input, v_conv2d_bwd_kernel,
      v_softmax_fwd, v_softmax_bwd, v_reduce_sum,
  };
  return t;
}

}  // namespace ducd::kernels

#else  // !__AVX2__

namespace ducd::kernels {
const KernelTable& avx2_table() { return scalar_table(); }
}  // namespace ducd::kernels

#endif
