// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "kernels_internal.hpp"

namespace thinker::kernels::detail {
namespace {

void td_residuals_avx2(const double* rewards, const double* values, const double* next_values, double gamma,
                       double* out, std::size_t n) {
  const __m256d g = _mm256_set1_pd(gamma);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_loadu_pd(rewards + i);
    const __m256d v = _mm256_loadu_pd(values + i);
    const __m256d vn = _mm256_loadu_pd(next_values + i);
    // Separate multiply and add (no FMA) so results match the scalar
    // reference bit-for-bit.
    const __m256d t = _mm256_add_pd(r, _mm256_mul_pd(g, vn));
    _mm256_storeu_pd(out + i, _mm256_sub_pd(t, v));
  }
  for (; i < n; ++i) out[i] = rewards[i] + gamma * next_values[i] - values[i];
}

void subtract_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

double horizontal_sum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

Moments moments_avx2(const double* x, std::size_t n) {
  __m256d sum = _mm256_setzero_pd();
  __m256d sum_sq = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    sum = _mm256_add_pd(sum, v);
    sum_sq = _mm256_fmadd_pd(v, v, sum_sq);
  }
  Moments m{horizontal_sum(sum), horizontal_sum(sum_sq)};
  for (; i < n; ++i) {
    m.sum += x[i];
    m.sum_sq += x[i] * x[i];
  }
  return m;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{Isa::Avx2, td_residuals_avx2, subtract_avx2, moments_avx2};
  return table;
}

}  // namespace thinker::kernels::detail
