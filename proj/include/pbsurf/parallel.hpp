#pragma once

#include <cstddef>
#include <functional>

namespace pbsurf {

/// Caps the number of worker threads used by node-parallel loops.
/// A value of 0 or 1 runs everything on the calling thread.
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunks never
/// overlap, so bodies may write to disjoint slots of shared output buffers.
/// Reductions must not be done inside body; use pairwise_sum afterwards.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace pbsurf
