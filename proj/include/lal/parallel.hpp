#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lal {

/// Worker count used when a caller passes 0.
inline unsigned default_workers() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

/// Runs body(i) for i in [0, n). Work items are claimed dynamically, so
/// callers must write results into per-index slots; any order-dependent
/// reduction happens afterwards on the caller's side. The first exception
/// thrown by a body is rethrown once all workers have stopped.
template <class Body>
void parallel_for(std::size_t n, unsigned workers, Body&& body) {
    if (workers == 0) workers = default_workers();
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto run = [&] {
        for (;;) {
            if (failed.load(std::memory_order_relaxed)) return;
            std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
        run();
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace lal
