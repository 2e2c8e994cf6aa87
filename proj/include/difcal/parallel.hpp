#pragma once

#include <atomic>
#include <thread>
#include <vector>

namespace difcal {

/// Worker count from the DIFCAL_WORKERS environment variable, falling back
/// to std::thread::hardware_concurrency().
int default_workers();

/// Runs f(block) for block = 0..blocks-1 on up to `threads` workers.
/// Block boundaries never depend on the thread count, so callers that
/// write per-block outputs and reduce them in block order get results
/// that are independent of the worker count.
template <typename F>
void parallel_blocks(int blocks, int threads, F&& f) {
  if (blocks <= 0) return;
  if (threads <= 1 || blocks == 1) {
    for (int b = 0; b < blocks; ++b) f(b);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      int b = next.fetch_add(1);
      if (b >= blocks) return;
      f(b);
    }
  };
  int n = std::min(threads, blocks);
  std::vector<std::thread> pool;
  pool.reserve(n - 1);
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace difcal
