#pragma once

#include <cstddef>
#include <functional>

namespace transit {

/// Worker count: TRANSIT_RETRIEVE_THREADS if set and positive, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Work items
/// must be independent and write only to their own slot of a pre-sized
/// output. If any item throws, the exception of the lowest failing index is
/// rethrown after all workers finish, so failures are reported the same way
/// regardless of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace transit
