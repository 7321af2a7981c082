#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace burgers {

/// Evaluates fn(i) for i in [0, n) on up to `workers` threads and returns the
/// results in index order. Work is split into contiguous blocks; the caller folds
/// the returned vector serially, so the reduction order never depends on threads.
template <typename Fn>
auto parallel_map(std::size_t n, unsigned workers, Fn&& fn) {
    using Result = decltype(fn(std::size_t{0}));
    std::vector<Result> out(n);
    workers = std::max(1u, workers);
    if (workers == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    const std::size_t nw = std::min<std::size_t>(workers, n);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (std::size_t w = 0; w < nw; ++w) {
        const std::size_t lo = n * w / nw;
        const std::size_t hi = n * (w + 1) / nw;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) out[i] = fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

} // namespace burgers
