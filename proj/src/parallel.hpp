#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace hypergrad::detail {

// Static-chunked parallel loop over [0, n). Work items must be independent;
// callers keep determinism by writing into per-index slots and reducing in
// index order afterwards.
inline void parallel_for(int n, int threads,
                         const std::function<void(int)>& body) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    const int workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&, t]() {
            for (int i = t; i < n; i += workers) {
                body(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

} // namespace hypergrad::detail
