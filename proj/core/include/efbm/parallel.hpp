#pragma once

#include <cstddef>
#include <functional>

namespace efbm {

/// Worker count: EFBM_WORKERS if set and positive, otherwise hardware concurrency.
std::size_t worker_count();

/// Runs body(task) for task in [0, n_tasks) on up to `workers` threads.
/// Tasks are claimed dynamically, so callers that need deterministic results
/// must write per-task outputs and reduce them afterwards in task order.
/// The first exception thrown by any task is rethrown on the calling thread.
void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& body,
                  std::size_t workers = worker_count());

/// Fixed partition of [0, n) into blocks of `block` items; part of the
/// reproducibility record written next to every Monte Carlo result.
struct BlockPartition {
  std::size_t items = 0;
  std::size_t block = 0;
  std::size_t blocks() const { return block == 0 ? 0 : (items + block - 1) / block; }
  std::size_t begin(std::size_t b) const { return b * block; }
  std::size_t end(std::size_t b) const { return b * block + block < items ? b * block + block : items; }
};

}  // namespace efbm
