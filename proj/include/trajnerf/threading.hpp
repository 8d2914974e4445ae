#pragma once

#include <cstddef>
#include <functional>

namespace trajnerf {

// Caps the number of worker threads used by parallel_for. 0 restores the
// hardware default.
void set_thread_cap(int n);
int thread_cap();

// Runs fn(begin, end) over disjoint chunks of [0, n). Chunk boundaries are a
// fixed function of n and chunk_size, never of the worker count, so any
// per-chunk accumulation stays reproducible across thread settings as long
// as the caller reduces chunks in index order.
void parallel_for_chunks(std::size_t n, std::size_t chunk_size,
                         const std::function<void(std::size_t chunk_index, std::size_t begin,
                                                  std::size_t end)>& fn);

// Element-wise convenience over parallel_for_chunks.
void parallel_for(std::size_t n, const std::function<void(std::size_t i)>& fn);

std::size_t chunk_count(std::size_t n, std::size_t chunk_size);

}  // namespace trajnerf
