#pragma once

#include <cstddef>
#include <functional>

namespace mlmcmc {

/// Hardware parallelism, overridable by the MLMC_THREADS environment variable.
std::size_t default_thread_count();

/// Runs body(i) for i in [0, n) on up to `threads` workers. Work items are
/// claimed dynamically; callers write results into pre-sized slots so the
/// output never depends on scheduling. The first exception thrown by any
/// item is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

}  // namespace mlmcmc
