#pragma once

#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "unicon/errors.hpp"

namespace unicon {

// Worker count resolution: explicit request > UNICON_THREADS > 1.
// 0 means "ask the hardware".
inline int resolve_threads(int requested) {
    int n = requested;
    if (n < 0) {
        if (const char* env = std::getenv("UNICON_THREADS")) {
            try {
                n = std::stoi(env);
            } catch (...) {
                throw config_error(std::string("bad UNICON_THREADS value: ") + env);
            }
        } else {
            n = 1;
        }
    }
    if (n == 0) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    return n;
}

// Run fn(begin, end) over contiguous chunks of [0, n).  Chunk boundaries
// depend only on (n, threads), so any value written at index i is identical
// whichever worker computed it; reductions stay deterministic as long as the
// caller combines per-chunk results in chunk order.  The first exception
// thrown by any worker is rethrown on the calling thread.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t t = static_cast<std::size_t>(threads < 1 ? 1 : threads);
    if (t == 1 || n == 1) {
        fn(0, n);
        return;
    }
    const std::size_t workers = t < n ? t : n;
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = lo + chunk < n ? lo + chunk : n;
        if (lo >= hi) break;
        pool.emplace_back([&fn, &errors, w, lo, hi] {
            try {
                fn(lo, hi);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace unicon
