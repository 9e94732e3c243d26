#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace occultist {

/// Worker count, overridable through OCCULTIST_THREADS.
inline unsigned thread_count() {
    if (const char* env = std::getenv("OCCULTIST_THREADS")) {
        long n = std::strtol(env, nullptr, 10);
        if (n >= 1 && n <= 256) return static_cast<unsigned>(n);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs f(i) for i in [0, n). The caller aggregates results by index, so the
/// outcome does not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    unsigned workers = thread_count();
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            f(i);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
}

}  // namespace occultist
