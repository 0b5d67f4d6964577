#ifndef VEMFACET_PARALLEL_HPP
#define VEMFACET_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vemfacet
{

  /// Number of workers for a requested thread count (0 = available parallelism).
  inline unsigned worker_count(unsigned requested)
  {
    if (requested > 0) {
      return requested;
    }
    return std::max(1u, std::thread::hardware_concurrency());
  }

  /// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be written to
  /// per-index slots; the first exception (lowest index) is rethrown after all workers stop.
  template <typename Body>
  void parallel_for(std::size_t n, unsigned threads, Body body)
  {
    const unsigned workers = std::min<std::size_t>(worker_count(threads), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
      for (std::size_t i = 0; i < n; ++i) {
        body(i);
      }
      return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex m;
    std::size_t error_index = n;
    std::exception_ptr error;
    auto run = [&]() {
      for (;;) {
        const std::size_t i = next++;
        if (i >= n || failed) {
          return;
        }
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (i < error_index) {
            error_index = i;
            error = std::current_exception();
          }
          failed = true;
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back(run);
    }
    for (auto & t : pool) {
      t.join();
    }
    if (error) {
      std::rethrow_exception(error);
    }
  }

} // namespace vemfacet

#endif
