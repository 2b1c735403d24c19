#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace thinker::kernels {

/// Instruction-set variants. Scalar is always available and is the
/// reference every other variant is tested against.
enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
};

/// One implementation of every kernel. All spans in one call have equal
/// length (checked by the public wrappers, not by the variants).
struct KernelTable {
  Isa isa;
  /// out[i] = rewards[i] + gamma * next_values[i] - values[i]
  void (*td_residuals)(const double* rewards, const double* values, const double* next_values, double gamma,
                       double* out, std::size_t n);
  /// out[i] = a[i] - b[i]
  void (*subtract)(const double* a, const double* b, double* out, std::size_t n);
  /// Sum and sum of squares.
  Moments (*moments)(const double* x, std::size_t n);
};

const KernelTable& scalar_table();

/// Variants compiled in and supported by this CPU, Scalar first.
std::vector<Isa> available_isas();

const KernelTable& table_for(Isa isa);

/// Chosen once per process: the widest supported variant, unless the
/// THINKER_KERNELS environment variable names another ("scalar", "avx2",
/// "neon").
const KernelTable& active();

void td_residuals(std::span<const double> rewards, std::span<const double> values,
                  std::span<const double> next_values, double gamma, std::span<double> out);
void subtract(std::span<const double> a, std::span<const double> b, std::span<double> out);
Moments moments(std::span<const double> x);

}  // namespace thinker::kernels
