// parallel.hpp: bounded worker pool for index-parallel loops

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace icct {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
    static std::atomic<unsigned> value{0};
    return value;
}
}  // namespace detail

/// Caps the number of worker threads. Zero restores the default
/// (ICCT_THREADS, else hardware concurrency).
inline void set_thread_count(unsigned n) { detail::thread_setting() = n; }

inline unsigned thread_count() {
    if (unsigned n = detail::thread_setting(); n > 0) return n;
    if (const char* env = std::getenv("ICCT_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, n). Each index is visited exactly once; callers
/// write results into per-index slots so reductions stay order-independent.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto body = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace icct
