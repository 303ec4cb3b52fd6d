#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace lbft::detail {

// Runs fn(0..count) on `jobs` workers. Callers write results into
// preallocated slots indexed by the task id, so aggregation stays
// order-independent and deterministic.
inline void parallel_for(std::size_t count, unsigned jobs,
                         const std::function<void(std::size_t)>& fn) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    if (jobs == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    unsigned spawn = std::min<std::size_t>(jobs, count);
    workers.reserve(spawn);
    for (unsigned w = 0; w < spawn; ++w) {
        workers.emplace_back([&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= count) break;
                fn(i);
            }
        });
    }
    for (auto& t : workers) t.join();
}

}  // namespace lbft::detail
