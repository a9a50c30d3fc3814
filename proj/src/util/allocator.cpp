#include "ngraph/util/allocator.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ngraph::util {

void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);  // glibc maximum on 64-bit
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 * 1024 * 1024);
#endif
}

}  // namespace ngraph::util
