#include "ducd/kernels/api.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace ducd::kernels {
namespace {

Backend detect() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return Backend::avx2;
#endif
  return Backend::scalar;
}

Backend initial_backend() {
  if (const char* env = std::getenv("DUCD_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0) return Backend::avx2;
  }
  return detect();
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{initial_backend()};
  return b;
}

}  // namespace

bool avx2_supported() { return detect() == Backend::avx2; }

const KernelTable& table() {
  return current().load(std::memory_order_relaxed) == Backend::avx2
             ? avx2_table()
             : scalar_table();
}

void set_backend(Backend b) { current().store(b, std::memory_order_relaxed); }

Backend active_backend() { return current().load(std::memory_order_relaxed); }

std::string backend_name() { return table().name; }

}  // namespace ducd::kernels
