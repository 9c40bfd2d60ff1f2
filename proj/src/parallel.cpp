#include "mothpose/parallel.hpp"

#include <cstdlib>
#include <thread>
#include <vector>

namespace mothpose {

int thread_count() {
    // Re-read every call (cheap) so tests can vary the worker count at
    // runtime when checking thread-count independence.
    if (const char* env = std::getenv("MOTHPOSE_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::int64_t begin, std::int64_t end, const std::function<void(std::int64_t)>& fn) {
    const std::int64_t total = end - begin;
    if (total <= 0) return;
    const int workers = static_cast<int>(std::min<std::int64_t>(thread_count(), total));
    if (workers == 1) {
        for (std::int64_t i = begin; i < end; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::int64_t chunk = (total + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
        const std::int64_t lo = begin + t * chunk;
        const std::int64_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace mothpose
