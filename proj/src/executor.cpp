#include "mpnet/executor.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mpnet {

Executor::Executor(unsigned threads) : threads_(threads) {
  if (threads_ == 0)
    threads_ = std::max(1u, std::thread::hardware_concurrency());
}

void Executor::parallel_for(
    std::size_t n, const std::function<void(std::size_t)> &task) const {
  if (n == 0)
    return;
  const std::size_t workers = std::min<std::size_t>(threads_, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      task(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::size_t error_index = n;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n)
        return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t)
      pool.emplace_back(worker);
    worker();
  }
  if (error)
    std::rethrow_exception(error);
}

} // namespace mpnet
