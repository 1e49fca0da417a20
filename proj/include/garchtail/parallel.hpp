#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace garchtail {

/// Worker count used when callers pass 0.
inline unsigned default_workers() noexcept {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1U : hw;
}

/**
 * @brief Runs fn(i) for i in [0, n) on up to `workers` threads.
 *
 * Work items are claimed dynamically; callers write results into slot i so the
 * output is independent of scheduling. The first exception thrown is rethrown.
 */
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    if (workers == 0) workers = default_workers();
    const auto nthreads = static_cast<std::size_t>(std::min<std::size_t>(workers, n));
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nthreads - 1);
    for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(body);
    body();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

/// Fixed block partition of [0, n) used to pin random streams to work units.
struct Blocks {
    std::size_t n;
    std::size_t size;

    [[nodiscard]] std::size_t count() const noexcept { return (n + size - 1) / size; }
    [[nodiscard]] std::size_t begin(std::size_t b) const noexcept { return b * size; }
    [[nodiscard]] std::size_t end(std::size_t b) const noexcept { return std::min(n, (b + 1) * size); }
};

}  // namespace garchtail
