#include "govprobe/kernels.hpp"

#if defined(GOVPROBE_HAVE_NEON) && defined(__aarch64__) && defined(__ARM_NEON)

#include <arm_neon.h>

namespace govprobe::kernels::detail {
namespace {

float max_f32_neon(const float* x, std::size_t n) {
  std::size_t i = 0;
  float best = x[0];
  if (n >= 4) {
    float32x4_t acc = vld1q_f32(x);
    for (i = 4; i + 4 <= n; i += 4) acc = vmaxq_f32(acc, vld1q_f32(x + i));
    best = vmaxvq_f32(acc);
  }
  for (; i < n; ++i) {
    if (x[i] > best) best = x[i];
  }
  return best;
}

double dot_f64_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void axpy_f64_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void gemm_nt_f64_neon(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot_f64_neon(a + i * k, b + j * k, k);
  }
}

}  // namespace

const KernelTable* neon_table() {
  static const KernelTable table{Isa::Neon, &max_f32_neon, &dot_f64_neon, &axpy_f64_neon, &gemm_nt_f64_neon};
  return &table;
}

}  // namespace govprobe::kernels::detail

#else

namespace govprobe::kernels::detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace govprobe::kernels::detail

#endif
