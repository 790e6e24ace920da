#ifndef MAULAB_PARALLEL_HPP
#define MAULAB_PARALLEL_HPP

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace maulab {

// Worker count: hardware concurrency capped by MAULAB_THREADS when set.
inline int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  int n = hw == 0 ? 1 : static_cast<int>(hw);
  if (const char* env = std::getenv("MAULAB_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1 && cap < n) n = cap;
  }
  return n;
}

// Each index is processed exactly once; `fn` must write only to its own
// slot so results are order-deterministic regardless of thread count.
inline void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
  int workers = worker_count();
  if (workers <= 1 || n <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (workers > n) workers = static_cast<int>(n);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w]() {
      for (int64_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace maulab

#endif
