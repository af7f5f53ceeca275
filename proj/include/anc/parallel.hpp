#pragma once

#include <cstddef>
#include <functional>

namespace anc {

/// Global worker cap. Initialised from ANC_LAB_THREADS when set, otherwise
/// std::thread::hardware_concurrency().
std::size_t max_threads();
void set_max_threads(std::size_t n);

/// Runs body(i) for i in [0, n). Iterations are statically partitioned into
/// contiguous chunks, so each index is processed exactly once and results
/// written to per-index slots do not depend on scheduling. The first
/// exception thrown by any worker is rethrown on the caller's thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace anc
