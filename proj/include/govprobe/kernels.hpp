#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops. Every kernel has a scalar reference version and,
// where the target supports it, an AVX2 (x86-64) or NEON (aarch64) variant.
// The active table is picked once at first use from CPU feature detection;
// GOVPROBE_SIMD=scalar in the environment forces the reference path.

namespace govprobe::kernels {

enum class Isa { Scalar, Avx2, Neon };

struct KernelTable {
  Isa isa;
  // max over n >= 1 floats
  float (*max_f32)(const float* x, std::size_t n);
  double (*dot_f64)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy_f64)(double a, const double* x, double* y, std::size_t n);
  // c[i*n + j] = sum_k a[i*k + .] * b[j*k + .]; a is m x k, b is n x k, all row-major
  void (*gemm_nt_f64)(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
};

std::string_view isa_name(Isa isa);

/// True when the variant was compiled in and the running CPU supports it.
bool isa_available(Isa isa);

/// Table for a specific variant; throws std::invalid_argument when unavailable.
const KernelTable& table_for(Isa isa);

const KernelTable& active();

// Convenience wrappers over active().
float max_value(std::span<const float> x);
double dot(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);
// c = a * b^T with a (m x k), b (n x k) and c (m x n) row-major
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m, std::size_t n,
             std::size_t k);

namespace detail {
const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled
const KernelTable* neon_table();
}  // namespace detail

}  // namespace govprobe::kernels
