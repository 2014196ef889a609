#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace polarpose::detail {

// Runs fn(y0, y1) over contiguous row bands. Bands are disjoint, so any
// per-pixel-pure kernel produces identical output for every thread count.
inline void parallel_rows(int height, int num_threads,
                          const std::function<void(int, int)>& fn) {
  if (height <= 0) return;
  unsigned hw = std::thread::hardware_concurrency();
  int threads = num_threads > 0 ? num_threads : static_cast<int>(hw ? hw : 1);
  threads = std::clamp(threads, 1, height);
  if (threads == 1) {
    fn(0, height);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  int base = height / threads;
  int extra = height % threads;
  int y = 0;
  for (int i = 0; i < threads; ++i) {
    int rows = base + (i < extra ? 1 : 0);
    pool.emplace_back(fn, y, y + rows);
    y += rows;
  }
  for (auto& t : pool) t.join();
}

}  // namespace polarpose::detail
