#pragma once

#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace skytomo {

/// Worker count: `requested` if positive, else SKYTOMO_THREADS, else hardware concurrency.
int resolve_threads(int requested);

/// Runs fn(worker) on `workers` threads (inline when workers == 1) and rethrows
/// the first exception.
template <typename Fn>
void run_workers(int workers, Fn&& fn) {
  if (workers <= 1) {
    fn(0);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        fn(w);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Static strided split of [0, n) across workers: worker w handles w, w + W, ...
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  run_workers(workers, [&](int w) {
    for (std::size_t i = static_cast<std::size_t>(w); i < n; i += static_cast<std::size_t>(workers)) {
      fn(i);
    }
  });
}

}  // namespace skytomo
