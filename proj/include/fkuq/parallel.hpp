#pragma once

#include <cstddef>
#include <functional>

namespace fkuq {

/// Thread count: `requested` when positive, else $FKUQ_THREADS, else the
/// hardware concurrency.
int resolve_threads(int requested);

/// Runs body(i) for i in [0, count) on up to `threads` workers using a shared
/// atomic counter. Results must be written to per-index slots; the caller
/// reduces in index order. The exception thrown for the lowest index is
/// rethrown after all workers finish.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace fkuq
