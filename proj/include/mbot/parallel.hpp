#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mbot {

inline unsigned clamp_workers(unsigned requested) {
    if (requested == 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : hw;
    }
    return requested;
}

// Run fn(worker, job) for job in [0, njobs), with worker in [0, nworkers).
// Each job must write only its own output slot; scheduling order then has no
// observable effect, so results are independent of the worker count.
// workers <= 1 runs inline with worker id 0.
template <class Fn>
void parallel_for(std::size_t njobs, unsigned workers, Fn&& fn) {
    if (njobs == 0) return;
    workers = clamp_workers(workers);
    if (workers <= 1 || njobs == 1) {
        for (std::size_t j = 0; j < njobs; ++j) fn(0u, j);
        return;
    }
    const unsigned nthreads =
        static_cast<unsigned>(std::min<std::size_t>(workers, njobs));
    const std::size_t grain = std::max<std::size_t>(1, njobs / (nthreads * 8));
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (unsigned t = 0; t < nthreads; ++t)
        pool.emplace_back([&, t] {
            try {
                while (true) {
                    const std::size_t s = next.fetch_add(grain);
                    if (s >= njobs) return;
                    const std::size_t e = std::min(njobs, s + grain);
                    for (std::size_t j = s; j < e; ++j) fn(t, j);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace mbot
