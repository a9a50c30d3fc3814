#pragma once

namespace ngraph::util {

/// Keeps freed heap memory in the process instead of returning it to the
/// kernel. Training allocates and frees the same large tensors every step;
/// with glibc defaults each one is a fresh mmap plus page faults. No-op on
/// other C libraries. Call once from main().
void retain_freed_memory();

}  // namespace ngraph::util
