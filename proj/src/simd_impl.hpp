#pragma once

#include "sgles/simd.hpp"

namespace sgles::simd::detail {

extern const KernelTable kScalarTable;

#if defined(SGLES_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

}  // namespace sgles::simd::detail
