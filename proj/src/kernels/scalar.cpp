#include "govprobe/kernels.hpp"

namespace govprobe::kernels::detail {
namespace {

float max_f32_scalar(const float* x, std::size_t n) {
  float best = x[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (x[i] > best) best = x[i];
  }
  return best;
}

double dot_f64_scalar(const double* x, const double* y, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void axpy_f64_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gemm_nt_f64_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot_f64_scalar(a + i * k, b + j * k, k);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::Scalar, &max_f32_scalar, &dot_f64_scalar, &axpy_f64_scalar, &gemm_nt_f64_scalar};
  return table;
}

}  // namespace govprobe::kernels::detail
