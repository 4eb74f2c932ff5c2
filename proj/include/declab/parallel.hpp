#pragma once

#include <cstddef>
#include <functional>

namespace declab {

/// Number of workers to use when the caller passes 0.
std::size_t default_workers();

/// Calls body(i) for every i in [0, count) using up to `workers` threads.
/// Indices are handed out in contiguous blocks; body must only write to
/// index-owned slots, which keeps results independent of the worker count.
/// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace declab
