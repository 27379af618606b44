#ifndef DRIFTSCAPE_PARALLEL_HPP
#define DRIFTSCAPE_PARALLEL_HPP

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace driftscape {

/// Worker count: DRIFTSCAPE_THREADS when set, otherwise the hardware count.
inline int worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("DRIFTSCAPE_THREADS")) {
    const int requested = std::atoi(env);
    if (requested >= 1 && requested < hw) return requested;
    if (requested >= 1) return requested > hw ? hw : requested;
  }
  return hw;
}

/// Runs f(i) for i in [0, n). Results must be written to preallocated,
/// index-owned slots; the call order is unspecified but the slot layout
/// makes the aggregate independent of scheduling.
template <typename F>
void parallel_for(long n, F&& f) {
  const int workers = worker_count();
  if (workers <= 1 || n <= 1) {
    for (long i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  const int used = static_cast<int>(workers < n ? workers : n);
  pool.reserve(static_cast<std::size_t>(used));
  for (int w = 0; w < used; ++w) {
    pool.emplace_back([&] {
      for (long i = next.fetch_add(1); i < n; i = next.fetch_add(1)) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace driftscape

#endif
