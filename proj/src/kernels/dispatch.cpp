#include <cstdlib>
#include <stdexcept>
#include <string>

#include "govprobe/kernels.hpp"

namespace govprobe::kernels {
namespace {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(__i386__)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* compiled(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return &detail::scalar_table();
    case Isa::Avx2:
      return detail::avx2_table();
    case Isa::Neon:
      return detail::neon_table();
  }
  return nullptr;
}

const KernelTable& select() {
  if (const char* forced = std::getenv("GOVPROBE_SIMD"); forced && std::string(forced) == "scalar") {
    return detail::scalar_table();
  }
  for (Isa isa : {Isa::Avx2, Isa::Neon}) {
    if (isa_available(isa)) return *compiled(isa);
  }
  return detail::scalar_table();
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) { return compiled(isa) != nullptr && cpu_supports(isa); }

const KernelTable& table_for(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("kernel variant not available: " + std::string(isa_name(isa)));
  }
  return *compiled(isa);
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

float max_value(std::span<const float> x) {
  if (x.empty()) throw std::invalid_argument("max_value of empty range");
  return active().max_f32(x.data(), x.size());
}

double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("dot: length mismatch");
  return active().dot_f64(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  active().axpy_f64(a, x.data(), y.data(), x.size());
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m, std::size_t n,
             std::size_t k) {
  if (a.size() != m * k || b.size() != n * k || c.size() != m * n) {
    throw std::invalid_argument("gemm_nt: shape mismatch");
  }
  if (m == 0 || n == 0) return;
  active().gemm_nt_f64(a.data(), b.data(), c.data(), m, n, k);
}

}  // namespace govprobe::kernels
