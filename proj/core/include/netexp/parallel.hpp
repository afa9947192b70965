#pragma once

#include <cstddef>
#include <functional>

namespace netexp {

// NETEXP_THREADS env var, else 1. Outputs never depend on this value:
// work is carved into fixed blocks and reduced in block order.
int default_thread_count();

// Runs fn(block_index, begin, end) over [0, count) split into fixed-size
// blocks. Blocks are claimed dynamically but each writes only to storage
// indexed by block_index, so results are identical for any thread count.
void parallel_blocks(std::size_t count, std::size_t block_size, int threads,
                     const std::function<void(std::size_t, std::size_t,
                                              std::size_t)>& fn);

}  // namespace netexp
