#pragma once

// Fixed-size worker pool over an index range; results come back in index order.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace rcp::harness {

template <class T>
struct IndexedOutcome {
  std::vector<std::optional<T>> results;  // empty slots: not run or failed
  std::exception_ptr first_error;         // error of the lowest failing index
  std::size_t failed_index = 0;
};

// Once a task fails, tasks with larger indices are skipped; those below it still
// complete so the prefix of results is always contiguous.
template <class T>
IndexedOutcome<T> parallel_map(std::size_t count, std::size_t workers,
                               const std::function<T(std::size_t)>& task) {
  IndexedOutcome<T> out;
  out.results.resize(count);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> stop_at{count};
  std::mutex error_mutex;

  auto worker = [&] {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= count || idx >= stop_at.load()) return;
      try {
        out.results[idx] = task(idx);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!out.first_error || idx < out.failed_index) {
          out.first_error = std::current_exception();
          out.failed_index = idx;
        }
        std::size_t cur = stop_at.load();
        while (idx < cur && !stop_at.compare_exchange_weak(cur, idx)) {
        }
      }
    }
  };

  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, count));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (out.first_error) {
    for (std::size_t i = out.failed_index; i < count; ++i) out.results[i].reset();
  }
  return out;
}

}  // namespace rcp::harness
