#ifndef XXZ_PARALLEL_HPP
#define XXZ_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace xxz {

// Worker count: explicit value if positive, else CHAINCTL_JOBS, else hardware concurrency.
inline int resolve_jobs(int requested)
{
    if (requested > 0) return requested;
    if (const char* env = std::getenv("CHAINCTL_JOBS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Evaluates fn(i) for i in [0, count) on up to `jobs` threads; results keep index order.
template <class Fn>
auto parallel_map(int count, int jobs, Fn fn) -> std::vector<decltype(fn(0))>
{
    using R = decltype(fn(0));
    std::vector<R> out(count);
    jobs = std::max(1, std::min(jobs, count));
    if (jobs == 1) {
        for (int i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (int i; (i = next++) < count;) {
                try {
                    out[i] = fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
    return out;
}

} // namespace xxz

#endif
