#ifndef CMDIS_PARALLEL_HPP
#define CMDIS_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace cmdis {

inline unsigned default_workers() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Runs fn(i) for i in [0, n) on `workers` threads with dynamic scheduling.
// Each index is processed exactly once; fn must write only to per-index
// state so results do not depend on the worker count.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(n, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  unsigned count = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  pool.reserve(count);
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Static partition of [0, n) into at most `workers` contiguous chunks.
// Used where a deterministic reduction order is required: process chunks
// in parallel, then combine partial results in chunk order.
inline std::vector<std::pair<std::size_t, std::size_t>> static_chunks(std::size_t n,
                                                                      unsigned workers) {
  std::vector<std::pair<std::size_t, std::size_t>> chunks;
  if (n == 0) return chunks;
  std::size_t w = workers == 0 ? 1 : workers;
  w = std::min<std::size_t>(w, n);
  std::size_t base = n / w, rem = n % w, begin = 0;
  for (std::size_t k = 0; k < w; ++k) {
    std::size_t len = base + (k < rem ? 1 : 0);
    chunks.emplace_back(begin, begin + len);
    begin += len;
  }
  return chunks;
}

}  // namespace cmdis

#endif
