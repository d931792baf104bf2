#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace memloss::detail {

// Worker count: hardware concurrency, capped by MEMLOSS_THREADS when set.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("MEMLOSS_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
        } catch (...) {
        }
    }
    return n;
}

// Runs fn(begin, end) over disjoint chunks of [0, count). Results must not
// depend on the chunking; callers only write to their own index range.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn, std::size_t min_chunk = 4096) {
    const unsigned workers = worker_count();
    if (workers <= 1 || count < 2 * min_chunk) {
        fn(std::size_t{0}, count);
        return;
    }
    const std::size_t chunks = std::min<std::size_t>(workers, count / min_chunk);
    const std::size_t step = (count + chunks - 1) / chunks;
    std::vector<std::thread> pool;
    pool.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t b = c * step;
        const std::size_t e = std::min(count, b + step);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& t : pool) t.join();
}

} // namespace memloss::detail
