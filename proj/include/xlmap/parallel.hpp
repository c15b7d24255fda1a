#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace xlmap {

// Environment variable consulted for the default worker count.
inline constexpr const char* kThreadsEnvVar = "XLMAP_THREADS";

// Worker count from XLMAP_THREADS, else the hardware concurrency (min 1).
inline std::size_t default_thread_count() {
  if (const char* env = std::getenv(kThreadsEnvVar)) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs fn(task) for task in [0, n_tasks) on up to `threads` workers.
// Tasks are claimed dynamically; callers must make each task's result
// independent of which worker ran it. The first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n_tasks, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = default_thread_count();
  threads = std::min(threads, n_tasks);
  if (threads <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t) fn(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= n_tasks) return;
      try {
        fn(t);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n_tasks);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace xlmap
