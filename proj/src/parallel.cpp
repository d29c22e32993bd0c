#include "heatlab/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace heatlab {

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HEATLAB_WORKERS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  int workers) {
  if (n == 0) return;
  const std::size_t w = static_cast<std::size_t>(worker_count(workers));
  if (w == 1 || n == 1) {
    body(0, n);
    return;
  }
  const std::size_t chunks = std::min(n, w);
  std::vector<std::thread> threads;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = n * c / chunks;
    const std::size_t end = n * (c + 1) / chunks;
    threads.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace heatlab
