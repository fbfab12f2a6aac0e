// parallel.hpp - index-parallel loop over independent jobs
#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace noisesync {

inline int resolve_workers(int requested) {
    return requested > 0 ? requested : int(std::max(1u, std::thread::hardware_concurrency()));
}

// Calls job(i) once for every i in [0, count). Jobs are handed out through an
// atomic counter; the first exception stops further dispatch and is rethrown.
template <class Job>
void parallel_for(long count, int workers, Job&& job) {
    std::atomic<long> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr failure;
    auto worker = [&] {
        for (long i; !failed && (i = next.fetch_add(1)) < count;) {
            try {
                job(i);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
    };
    const int w = int(std::min<long>(resolve_workers(workers), std::max(1L, count)));
    if (w <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < w; ++k) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace noisesync
