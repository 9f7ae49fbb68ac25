#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dnetreg {

namespace detail {
inline int& thread_count_ref() {
  static int n = 0;  // 0 = hardware concurrency
  return n;
}
}  // namespace detail

/// Global worker count for parallel_for. 0 means "use hardware concurrency".
inline void set_num_threads(int n) { detail::thread_count_ref() = n; }

inline int num_threads() {
  int n = detail::thread_count_ref();
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return n > 0 ? n : 1;
}

/// Runs fn(i) for i in [0, n_tasks). Tasks are claimed dynamically by a
/// small batch of threads; each task must write only to its own output
/// slot, so results match the sequential execution no matter how tasks
/// land on threads. The first task exception is rethrown on the caller.
inline void parallel_for(int n_tasks, const std::function<void(int)>& fn) {
  if (n_tasks <= 0) return;
  const int workers = std::min(num_threads(), n_tasks);
  if (workers <= 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n_tasks || failed.load(std::memory_order_relaxed)) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dnetreg
