#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_internal.hpp"

namespace thinker::kernels {
namespace {

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2:
#if defined(THINKER_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::Neon:
#if defined(THINKER_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& choose() {
  if (const char* forced = std::getenv("THINKER_KERNELS"); forced && *forced) {
    for (Isa isa : available_isas()) {
      if (isa_name(isa) == forced) return table_for(isa);
    }
    // Unknown or unsupported request: fall through to auto-selection.
  }
  return table_for(available_isas().back());
}

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string("kernel size mismatch: ") + what);
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "scalar";
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
    if (cpu_supports(isa)) out.push_back(isa);
  }
  return out;
}

const KernelTable& table_for(Isa isa) {
  if (!cpu_supports(isa)) throw std::invalid_argument("kernel variant not available: " + std::string(isa_name(isa)));
  switch (isa) {
#if defined(THINKER_HAVE_AVX2)
    case Isa::Avx2: return detail::avx2_table();
#endif
#if defined(THINKER_HAVE_NEON)
    case Isa::Neon: return detail::neon_table();
#endif
    default: break;
  }
  return scalar_table();
}

const KernelTable& active() {
  static const KernelTable& table = choose();
  return table;
}

void td_residuals(std::span<const double> rewards, std::span<const double> values,
                  std::span<const double> next_values, double gamma, std::span<double> out) {
  require_same_size(rewards.size(), values.size(), "rewards/values");
  require_same_size(rewards.size(), next_values.size(), "rewards/next_values");
  require_same_size(rewards.size(), out.size(), "rewards/out");
  active().td_residuals(rewards.data(), values.data(), next_values.data(), gamma, out.data(), out.size());
}

void subtract(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  require_same_size(a.size(), b.size(), "a/b");
  require_same_size(a.size(), out.size(), "a/out");
  active().subtract(a.data(), b.data(), out.data(), out.size());
}

Moments moments(std::span<const double> x) { return active().moments(x.data(), x.size()); }

}  // namespace thinker::kernels
