#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace fewt {

// Resolves a worker count: `requested` 0 means hardware concurrency; the
// FEWT_THREADS environment variable caps the result when set.
int worker_count(int requested);

// Runs fn(block_idx, begin, end, thread_slot) over [0, n) split into fixed
// blocks. Block size is independent of the worker count, so any per-block
// accumulation merged in block order is bitwise reproducible regardless of
// threading.
void parallel_blocks(std::size_t n, std::size_t block_size, int threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t, int)>& fn);

}  // namespace fewt
