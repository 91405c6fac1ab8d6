#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace hypou {

// Runs body(i) for i in [0, n) on up to `workers` threads with a static
// task -> thread assignment. Each task must write only its own output slot;
// callers reduce sequentially afterwards, so results do not depend on the
// worker count.
inline void parallel_for(int n, int workers, const std::function<void(int)>& body) {
    if (n <= 0) return;
    if (workers < 1) workers = 1;
    const int W = std::min(workers, n);
    if (W == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(W);
    std::vector<std::exception_ptr> errors(W);
    for (int w = 0; w < W; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += W) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace hypou
