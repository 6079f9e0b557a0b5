#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <thread>
#include <vector>

namespace basecap {

/// Number of worker threads used by parallel loops. 0 means hardware concurrency.
inline unsigned& thread_setting() {
    static unsigned n = 0;
    return n;
}

inline void set_threads(unsigned n) { thread_setting() = n; }

inline unsigned effective_threads() {
    unsigned n = thread_setting();
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

/// Runs body(begin, end) over contiguous chunks of [0, n). The chunking only
/// affects scheduling; callers write per-index results so output never depends on it.
template <class Body>
void parallel_chunks(std::size_t n, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(effective_threads(), std::max<std::size_t>(n, 1));
    if (workers <= 1 || n < 64) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = w * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, b, e] { body(b, e); });
    }
}

template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    parallel_chunks(n, [&body](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) body(i);
    });
}

/// Order-fixed pairwise summation; the result is independent of the thread count.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace basecap
