#pragma once

// Worker pool helpers. Results never depend on the worker count: callers
// split work into fixed tasks and fold task results in index order.

#include <cstddef>
#include <functional>

namespace nctomo {

/// Number of worker threads. Resolution order: set_worker_count() override,
/// NCTOMO_WORKERS environment variable, hardware concurrency.
int worker_count();

/// Overrides the worker count for this process; 0 restores the default.
void set_worker_count(int workers);

/// Runs task(i) for i in [0, n_tasks) on up to worker_count() threads.
/// The first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& task);

}  // namespace nctomo
