#pragma once

#include <cstddef>
#include <functional>

namespace stein {

struct ExecPolicy {
    int workers = 0;      // 0: hardware concurrency
    bool strict = true;   // reductions run in index order (bit-exact for any worker count)
};

int resolve_workers(int requested);

// Calls body(i) for i in [0, count) on up to `workers` threads. The first exception is rethrown.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

}  // namespace stein
