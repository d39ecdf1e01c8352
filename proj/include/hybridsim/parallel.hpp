#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace hybridsim {

/// Runs fn(task) for task = 0..n_tasks-1 on up to `threads` workers. Work is
/// split by task index, never by thread, so results that are merged in task
/// order are identical for any thread count.
inline void parallel_tasks(long n_tasks, int threads, const std::function<void(long)>& fn) {
  if (n_tasks <= 0) return;
  const int workers = static_cast<int>(std::min<long>(std::max(threads, 1), n_tasks));
  if (workers == 1) {
    for (long t = 0; t < n_tasks; ++t) fn(t);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (long t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1)) fn(t);
    });
  for (auto& th : pool) th.join();
}

}  // namespace hybridsim
