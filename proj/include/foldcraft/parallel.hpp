#pragma once

#include <functional>

namespace foldcraft {

// Worker count: min(hardware_concurrency, FOLDCRAFT_THREADS) when the
// environment variable is set, else hardware_concurrency.
int worker_count();

// Runs fn(i) for i in [0, n) across the worker pool. Each index must write
// only to its own output slot; results are then reduced by the caller in
// index order, so the outcome is independent of the thread count.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace foldcraft
