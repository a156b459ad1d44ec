#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qgraph {

// Runs task(chunk) for chunk in [0, n_chunks) on up to `workers` threads.
// Callers write results into per-chunk slots and reduce them in chunk order,
// which keeps every result independent of the worker count. The first
// exception thrown by any task is rethrown here.
template <class Task>
void for_each_chunk(std::size_t n_chunks, unsigned workers, Task&& task) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_chunks)));
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) task(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      try {
        task(c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n_chunks);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace qgraph
