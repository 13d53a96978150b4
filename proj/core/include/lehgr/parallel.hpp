#pragma once

#include <cstddef>
#include <functional>

namespace lehgr {

// Worker count: hardware concurrency capped by the LEHGR_THREADS
// environment variable (values < 1 read as 1).
int thread_budget();

// Runs fn(i) for i in [0, n) across the thread budget. Each index writes
// only its own output slot, so results are identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lehgr
