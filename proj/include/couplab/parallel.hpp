#pragma once

// Embarrassingly parallel path batches. Each path owns RNG streams keyed by
// its index, so results are bit-identical for any worker count; workers write
// disjoint slots and are merged by index.

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace couplab {

inline unsigned worker_count() {
  if (const char* env = std::getenv("COUPLING_LAB_THREADS")) {
    long v = std::atol(env);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// fn(path_index) is called exactly once for every index in [0, n).
template <typename Fn>
void parallel_for_paths(std::size_t n, Fn&& fn, unsigned n_workers = 0) {
  if (n_workers == 0) n_workers = worker_count();
  if (n_workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  const std::size_t chunk = std::max<std::size_t>(1, n / (8 * n_workers));
  auto work = [&] {
    for (;;) {
      std::size_t begin = next.fetch_add(chunk);
      if (begin >= n) return;
      std::size_t end = std::min(n, begin + chunk);
      for (std::size_t i = begin; i < end; ++i) fn(i);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
}

}  // namespace couplab
