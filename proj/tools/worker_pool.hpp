#pragma once

#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace evmtool {

/// Worker count resolution: explicit flag value > EVMCHAOS_THREADS > hardware.
inline int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("EVMCHAOS_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? int(hw) : 1;
}

/// Evaluate fn(i) for i in [0, n) on a pool of `threads` workers and return
/// the results ordered by index.  Items must be independent; output order is
/// fixed by the index alone, so results are identical for any pool size.
/// The first exception thrown by a worker is rethrown on the calling thread.
template <class T, class Fn>
std::vector<T> indexed_map(std::size_t n, int threads, Fn&& fn) {
    std::vector<T> out(n);
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        try {
            for (std::size_t i = next.fetch_add(1); i < n && !failed.load(std::memory_order_relaxed);
                 i = next.fetch_add(1))
                out[i] = fn(i);
        } catch (...) {
            if (!failed.exchange(true)) error = std::current_exception();
        }
    };
    std::size_t n_workers = std::min<std::size_t>(std::size_t(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

}  // namespace evmtool
