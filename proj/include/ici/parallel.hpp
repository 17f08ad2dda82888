#pragma once

#include <cstddef>
#include <functional>

namespace ici {

/// Worker count: ICI_THREADS if set and positive, else the hardware count.
std::size_t worker_count();

/// Calls fn(i) for i in [0, n) on up to worker_count() threads. Any exception
/// from a task is rethrown after all workers finish (the lowest index wins).
/// Calls made from inside a task run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ici
