// aarch64 only; NEON is part of the base ISA there.
#include <arm_neon.h>

#include "kernels_internal.hpp"

namespace thinker::kernels::detail {
namespace {

void td_residuals_neon(const double* rewards, const double* values, const double* next_values, double gamma,
                       double* out, std::size_t n) {
  const float64x2_t g = vdupq_n_f64(gamma);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t t = vaddq_f64(vld1q_f64(rewards + i), vmulq_f64(g, vld1q_f64(next_values + i)));
    vst1q_f64(out + i, vsubq_f64(t, vld1q_f64(values + i)));
  }
  for (; i < n; ++i) out[i] = rewards[i] + gamma * next_values[i] - values[i];
}

void subtract_neon(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

Moments moments_neon(const double* x, std::size_t n) {
  float64x2_t sum = vdupq_n_f64(0.0);
  float64x2_t sum_sq = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t v = vld1q_f64(x + i);
    sum = vaddq_f64(sum, v);
    sum_sq = vfmaq_f64(sum_sq, v, v);
  }
  Moments m{vaddvq_f64(sum), vaddvq_f64(sum_sq)};
  for (; i < n; ++i) {
    m.sum += x[i];
    m.sum_sq += x[i] * x[i];
  }
  return m;
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{Isa::Neon, td_residuals_neon, subtract_neon, moments_neon};
  return table;
}

}  // namespace thinker::kernels::detail
