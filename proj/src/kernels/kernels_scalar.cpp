#include "thinker/kernels.hpp"

namespace thinker::kernels {
namespace {

void td_residuals_scalar(const double* rewards, const double* values, const double* next_values, double gamma,
                         double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = rewards[i] + gamma * next_values[i] - values[i];
}

void subtract_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

Moments moments_scalar(const double* x, std::size_t n) {
  Moments m;
  for (std::size_t i = 0; i < n; ++i) {
    m.sum += x[i];
    m.sum_sq += x[i] * x[i];
  }
  return m;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::Scalar, td_residuals_scalar, subtract_scalar, moments_scalar};
  return table;
}

}  // namespace thinker::kernels
