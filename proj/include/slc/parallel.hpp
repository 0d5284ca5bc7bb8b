#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace slc {

// Runs fn(i) for i in [0, n). Work items must write to disjoint outputs;
// results are then independent of the thread count, which the learning
// contracts rely on. Falls back to a plain loop for small n.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (n < 64 || hw == 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    const std::size_t nthreads = std::min(hw, std::size_t(8));
    std::vector<std::thread> threads;
    std::exception_ptr first_error;
    std::mutex err_mutex;
    threads.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
        threads.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += nthreads)
                    fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error)
                    first_error = std::current_exception();
            }
        });
    }
    for (auto& th : threads)
        th.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace slc
