#pragma once

#include <cstddef>
#include <string>

namespace ducd::kernels {

// Geometry of one 2-D convolution call (NCHW, square kernel, zero padding).
struct ConvDims {
  int batch;
  int cin;
  int h;
  int w;
  int cout;
  int k;
  int stride;
  int pad;
  int hout;
  int wout;
};

// Raw double-precision kernels behind the tensor ops. Two implementations
// exist: a portable scalar reference and an AVX2 variant selected at runtime.
//
// Equivalence contract, enforced by tests:
//   - elementwise ops, exp, sigmoid, matmul, conv forward and conv
//     input-gradient are bitwise identical between backends (the vector
//     lanes replay the scalar per-output accumulation order, fma for fma);
//   - reductions (softmax normalization, kernel/bias gradients, sums)
//     may differ in summation order and agree to ~1e-13 relative.
struct KernelTable {
  const char* name;

  // Elementwise over n entries.
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*abs)(const double* a, double* out, std::size_t n);
  void (*relu)(const double* a, double* out, std::size_t n);
  void (*scale)(const double* a, double c, double* out, std::size_t n);
  void (*vexp)(const double* a, double* out, std::size_t n);
  void (*sigmoid)(const double* a, double* out, std::size_t n);

  // acc += c * x
  void (*axpy)(double c, const double* x, double* acc, std::size_t n);
  // acc += a * b  (elementwise)
  void (*fma_acc)(const double* a, const double* b, double* acc,
                  std::size_t n);
  // acc += (x > 0) * g
  void (*relu_bwd)(const double* x, const double* g, double* acc,
                   std::size_t n);
  // acc += sign(x) * g, sign(0) = 0
  void (*abs_bwd)(const double* x, const double* g, double* acc,
                  std::size_t n);
  // acc += y * (1 - y) * g, y = sigmoid output
  void (*sigmoid_bwd)(const double* y, const double* g, double* acc,
                      std::size_t n);

  // C[M,N] = A[M,K] * B[K,N], or += when accumulate.
  void (*matmul)(const double* a, const double* b, double* c, int m, int k,
                 int n, bool accumulate);

  // out[b,co,oy,ox] = bias[co] + sum_{ci,kh,kw} in * kernel
  void (*conv2d_fwd)(const double* in, const double* kernel,
                     const double* bias, double* out, const ConvDims& d);
  // gin += correlation of gout with the kernel (transposed conv)
  void (*conv2d_bwd_input)(const double* gout, const double* kernel,
                           double* gin, const ConvDims& d);
  // gk += dL/dkernel, gbias += dL/dbias
  void (*conv2d_bwd_kernel)(const double* in, const double* gout, double* gk,
                            double* gbias, const ConvDims& d);

  // Row-wise softmax over an M x N matrix, max-shifted.
  void (*softmax_fwd)(const double* in, double* out, int m, int n);
  // gx += y * (g - rowdot(g, y))
  void (*softmax_bwd)(const double* y, const double* g, double* gx, int m,
                      int n);

  double (*reduce_sum)(const double* a, std::size_t n);
};

enum class Backend { scalar, avx2 };

const KernelTable& scalar_table();
const KernelTable& avx2_table();  // falls back to scalar entries off-x86

bool avx2_supported();

// Active table. Defaults to the widest supported backend; the DUCD_KERNELS
// environment variable ("scalar" / "avx2") or set_backend override it.
const KernelTable& table();
void set_backend(Backend b);
Backend active_backend();
std::string backend_name();

}  // namespace ducd::kernels
