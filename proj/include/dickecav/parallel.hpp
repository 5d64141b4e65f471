// parallel.hpp: index-parallel loops for independent parameter points
//
// Results must be written to slots owned by the index, so output is
// independent of the worker count and scheduling.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dickecav::parallel {

// DICKECAV_WORKERS if set to a positive integer, else the hardware concurrency.
int worker_count();

// Calls f(i) for i in [0, n). If any call throws, the exception of the lowest
// failing index is rethrown after all workers stop.
template <class F>
void for_each_index(std::size_t n, F&& f, int workers = worker_count()) {
    if (n == 0) return;
    const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
    if (w == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex m;
    std::size_t failed_index = n;
    std::exception_ptr error;
    {
        std::vector<std::jthread> pool;
        pool.reserve(w);
        for (std::size_t t = 0; t < w; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n && !failed; i = next++) {
                    try {
                        f(i);
                    } catch (...) {
                        std::lock_guard lock(m);
                        if (i < failed_index) {
                            failed_index = i;
                            error = std::current_exception();
                        }
                        failed = true;
                    }
                }
            });
    }
    if (error) std::rethrow_exception(error);
}

} // namespace dickecav::parallel
