#include "stein/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace stein {

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body) {
    const int w = int(std::min<std::size_t>(std::size_t(resolve_workers(workers)), std::max<std::size_t>(count, 1)));
    if (w <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto run = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(w - 1);
    for (int k = 1; k < w; ++k) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace stein
