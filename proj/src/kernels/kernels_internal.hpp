#pragma once

#include "thinker/kernels.hpp"

namespace thinker::kernels::detail {

#if defined(THINKER_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(THINKER_HAVE_NEON)
const KernelTable& neon_table();
#endif

}  // namespace thinker::kernels::detail
