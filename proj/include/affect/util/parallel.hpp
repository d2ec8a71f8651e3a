#pragma once

#include <cstddef>
#include <functional>

namespace affect {

/// Worker cap from AFFECT_E2E_THREADS, defaulting to the hardware thread count.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) over at most `workers` threads. Each index runs
/// exactly once; the first exception thrown is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t workers = worker_count());

}  // namespace affect
