#include "govprobe/kernels.hpp"

#if defined(GOVPROBE_HAVE_AVX2)

#include <immintrin.h>

namespace govprobe::kernels::detail {
namespace {

float max_f32_avx2(const float* x, std::size_t n) {
  std::size_t i = 0;
  float best = x[0];
  if (n >= 8) {
    __m256 acc = _mm256_loadu_ps(x);
    for (i = 8; i + 8 <= n; i += 8) acc = _mm256_max_ps(acc, _mm256_loadu_ps(x + i));
    __m128 lo = _mm256_castps256_ps128(acc);
    __m128 hi = _mm256_extractf128_ps(acc, 1);
    __m128 m = _mm_max_ps(lo, hi);
    m = _mm_max_ps(m, _mm_movehl_ps(m, m));
    m = _mm_max_ss(m, _mm_shuffle_ps(m, m, 0x55));
    best = _mm_cvtss_f32(m);
  }
  for (; i < n; ++i) {
    if (x[i] > best) best = x[i];
  }
  return best;
}

double dot_f64_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  __m128d s = _mm_add_pd(_mm256_castpd256_pd128(acc0), _mm256_extractf128_pd(acc0, 1));
  s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
  double sum = _mm_cvtsd_f64(s);
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void axpy_f64_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double hsum(__m256d v) {
  __m128d s = _mm_add_pd(_mm256_castpd256_pd128(v), _mm256_extractf128_pd(v, 1));
  s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
  return _mm_cvtsd_f64(s);
}

// Lane mask selecting the first r < 4 doubles of a tail load.
__m256i tail_mask(std::size_t r) {
  const __m256i idx = _mm256_setr_epi64x(0, 1, 2, 3);
  return _mm256_cmpgt_epi64(_mm256_set1_epi64x(static_cast<long long>(r)), idx);
}

// 4 rows of a against 3 rows of b; twelve accumulators stay in registers.
void block_4x3(const double* a, const double* b, double* c, std::size_t n, std::size_t k, __m256i mask) {
  __m256d acc[4][3];
  for (auto& row : acc) {
    for (auto& v : row) v = _mm256_setzero_pd();
  }
  const std::size_t full = k & ~std::size_t{3};
  for (std::size_t p = 0; p < full; p += 4) {
    const __m256d b0 = _mm256_loadu_pd(b + p);
    const __m256d b1 = _mm256_loadu_pd(b + k + p);
    const __m256d b2 = _mm256_loadu_pd(b + 2 * k + p);
    for (std::size_t r = 0; r < 4; ++r) {
      const __m256d ar = _mm256_loadu_pd(a + r * k + p);
      acc[r][0] = _mm256_fmadd_pd(ar, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_pd(ar, b1, acc[r][1]);
      acc[r][2] = _mm256_fmadd_pd(ar, b2, acc[r][2]);
    }
  }
  if (full < k) {
    const __m256d b0 = _mm256_maskload_pd(b + full, mask);
    const __m256d b1 = _mm256_maskload_pd(b + k + full, mask);
    const __m256d b2 = _mm256_maskload_pd(b + 2 * k + full, mask);
    for (std::size_t r = 0; r < 4; ++r) {
      const __m256d ar = _mm256_maskload_pd(a + r * k + full, mask);
      acc[r][0] = _mm256_fmadd_pd(ar, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_pd(ar, b1, acc[r][1]);
      acc[r][2] = _mm256_fmadd_pd(ar, b2, acc[r][2]);
    }
  }
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t j = 0; j < 3; ++j) c[r * n + j] = hsum(acc[r][j]);
  }
}

void gemm_nt_f64_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  const __m256i mask = tail_mask(k & 3);
  const std::size_t m4 = m - m % 4;
  const std::size_t n3 = n - n % 3;
  for (std::size_t i = 0; i < m4; i += 4) {
    for (std::size_t j = 0; j < n3; j += 3) block_4x3(a + i * k, b + j * k, c + i * n + j, n, k, mask);
    for (std::size_t j = n3; j < n; ++j) {
      for (std::size_t r = 0; r < 4; ++r) c[(i + r) * n + j] = dot_f64_avx2(a + (i + r) * k, b + j * k, k);
    }
  }
  for (std::size_t i = m4; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot_f64_avx2(a + i * k, b + j * k, k);
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{Isa::Avx2, &max_f32_avx2, &dot_f64_avx2, &axpy_f64_avx2, &gemm_nt_f64_avx2};
  return &table;
}

}  // namespace govprobe::kernels::detail

#else

namespace govprobe::kernels::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace govprobe::kernels::detail

#endif
