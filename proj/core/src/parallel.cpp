// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace deap {
namespace {

int threads_from_env() {
  const char* env = std::getenv("DEAP_THREADS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> threads{threads_from_env()};
  return threads;
}

}  // namespace

int thread_count() { return thread_setting().load(); }

void set_thread_count(int threads) { thread_setting().store(std::max(1, threads)); }

std::size_t parallel_chunk_count(std::size_t n) {
  const int threads = thread_count();
  if (threads <= 1 || n < 2) return 1;
  return std::min<std::size_t>(threads, n);
}

void parallel_chunks(std::size_t n,
                     const std::function<void(int, std::size_t, std::size_t)>& fn) {
  const std::size_t chunks = parallel_chunk_count(n);
  if (chunks == 1) {
    fn(0, 0, n);
    return;
  }
  const std::size_t base = n / chunks;
  const std::size_t extra = n % chunks;
  std::vector<std::thread> workers;
  workers.reserve(chunks - 1);
  std::size_t begin = 0;
  std::size_t first_end = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t end = begin + base + (c < extra ? 1 : 0);
    if (c == 0) {
      first_end = end;
    } else {
      workers.emplace_back(fn, static_cast<int>(c), begin, end);
    }
    begin = end;
  }
  fn(0, 0, first_end);
  for (auto& w : workers) w.join();
}

}  // namespace deap
