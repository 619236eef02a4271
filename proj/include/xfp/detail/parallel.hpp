#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace xfp::detail {

inline unsigned worker_count() {
    if (const char* env = std::getenv("XFP_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) {
            return static_cast<unsigned>(n);
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Static block partition over [0, n). Each index runs exactly once; callers
// must write results to disjoint slots so the output is order-independent.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned workers = worker_count();
    if (n == 0) {
        return;
    }
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    const std::size_t used = std::min<std::size_t>(workers, n);
    std::vector<std::thread> pool;
    pool.reserve(used);
    for (std::size_t t = 0; t < used; ++t) {
        pool.emplace_back([&, t] {
            const std::size_t lo = n * t / used;
            const std::size_t hi = n * (t + 1) / used;
            for (std::size_t i = lo; i < hi; ++i) {
                fn(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

} // namespace xfp::detail
