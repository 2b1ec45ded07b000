#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace n2n {

/// Worker count from DENOISE_THREADS; unset, empty or 0 means one per core.
inline unsigned worker_threads() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("DENOISE_THREADS");
    if (env == nullptr || *env == '\0') return hw;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || v < 0) return hw;
    return v == 0 ? hw : static_cast<unsigned>(v);
}

/// Runs fn(begin, end) over contiguous blocks of [0, n). Each index is
/// handled by exactly one call, so results are independent of the thread
/// count as long as fn writes only to its own rows.
template <class Fn>
void parallel_for_blocks(int n, Fn&& fn) {
    const int workers = std::min<int>(static_cast<int>(worker_threads()), std::max(n, 1));
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const int chunk = (n + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
        const int b = t * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&, t, b, e] {
            try {
                fn(b, e);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
}

}  // namespace n2n
