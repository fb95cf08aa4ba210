// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEAP_PARALLEL_HPP_
#define DEAP_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace deap {

// Kernel thread count. Initialized from the DEAP_THREADS environment
// variable (default 1). Results are deterministic for a fixed value.
int thread_count();
void set_thread_count(int threads);

// Number of chunks parallel_chunks(n, ...) will produce.
std::size_t parallel_chunk_count(std::size_t n);

// Splits [0, n) into thread_count() contiguous chunks with a static
// partition and runs fn(chunk_index, begin, end) on each. Chunk boundaries
// depend only on n and the thread count.
void parallel_chunks(std::size_t n,
                     const std::function<void(int, std::size_t, std::size_t)>& fn);

}  // namespace deap

#endif  // DEAP_PARALLEL_HPP_
