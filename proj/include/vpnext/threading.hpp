#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace vpnext {

/// Worker cap: VPNX_THREADS env var when set, hardware concurrency otherwise.
inline int worker_count() {
    if (const char* env = std::getenv("VPNX_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs f(i) for i in [0,n) on up to `threads` workers. Results must not
/// depend on schedule; callers combine per-index outputs in index order.
template <typename F>
void parallel_for(int n, int threads, F&& f) {
    if (n <= 0) return;
    if (threads > n) threads = n;
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (int i = w; i < n; i += threads) f(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace vpnext
