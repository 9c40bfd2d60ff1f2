#pragma once

#include <cstdint>
#include <functional>

namespace mothpose {

/// Worker count for parallel sections. Reads MOTHPOSE_THREADS once; falls
/// back to the hardware concurrency.
int thread_count();

/// Runs fn(i) for i in [begin, end), split into contiguous blocks across
/// worker threads. Each index is processed by exactly one thread, so any
/// computation whose per-index result does not depend on the split is
/// bit-identical for every thread count. Reductions must not be hidden
/// inside fn; accumulate results per index and combine in index order.
void parallel_for(std::int64_t begin, std::int64_t end, const std::function<void(std::int64_t)>& fn);

} // namespace mothpose
