#pragma once

#include <cstddef>
#include <functional>

namespace mpnet {

/// Runs index-addressed tasks on a fixed number of worker threads. Tasks must
/// write only to their own output slot; results are then independent of the
/// thread count. If several tasks throw, the exception of the lowest index is
/// rethrown after all workers finish.
class Executor {
public:
  /// threads == 0 selects the number of available cores.
  explicit Executor(unsigned threads = 1);

  unsigned threads() const noexcept { return threads_; }

  void parallel_for(std::size_t n,
                    const std::function<void(std::size_t)> &task) const;

private:
  unsigned threads_;
};

} // namespace mpnet
