#pragma once

#include <cstdlib>
#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace parabolica {

/// Worker count: hardware concurrency capped by PARABOLICA_THREADS.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("PARABOLICA_THREADS")) {
        long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return n;
}

/// Data-parallel index sweep. Each index is processed exactly once; results
/// must be written to per-index slots so the outcome is independent of the
/// schedule.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    unsigned workers = worker_count();
    if (workers <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto run = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                body(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    unsigned spawn = std::min<std::size_t>(workers, count);
    pool.reserve(spawn);
    for (unsigned t = 0; t < spawn; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

} // namespace parabolica
