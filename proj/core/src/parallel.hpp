#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace pixelreg::net {

// Strided index split. Work items must write only to their own index's slots,
// which keeps results independent of the thread count.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&fn, t, n, threads] {
      for (int i = t; i < n; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace pixelreg::net
