#pragma once

#include <cstddef>
#include <functional>

namespace heatlab {

// Worker count: explicit override, else HEATLAB_WORKERS, else hardware
// concurrency. Always >= 1.
int worker_count(int requested = 0);

// Runs body(begin, end) over [0, n) split into contiguous chunks. Chunking
// is a function of n only, so results that are reduced per chunk are
// identical for every worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  int workers = 0);

}  // namespace heatlab
