#pragma once

#include <cstdlib>
#include <future>
#include <string>
#include <thread>
#include <vector>

namespace fdsim::detail {

// Worker count: FDSIM_THREADS overrides hardware concurrency.
inline int thread_count() {
  if (const char* env = std::getenv("FDSIM_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, count) across workers. Callers write results into
// index-addressed slots, so the reduction order is independent of scheduling.
template <class Fn>
void parallel_index(int count, Fn&& fn) {
  const int workers = std::min(thread_count(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> futures;
  futures.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    futures.push_back(std::async(std::launch::async, [&, w]() {
      for (int i = w; i < count; i += workers) fn(i);
    }));
  }
  for (auto& f : futures) f.get();
}

}  // namespace fdsim::detail
