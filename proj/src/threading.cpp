#include "trajnerf/threading.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace trajnerf {

namespace {
std::atomic<int> g_thread_cap{0};

int effective_threads() {
  int cap = g_thread_cap.load(std::memory_order_relaxed);
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (cap <= 0) return hw;
  return std::min(cap, hw);
}
}  // namespace

void set_thread_cap(int n) { g_thread_cap.store(n, std::memory_order_relaxed); }
int thread_cap() { return effective_threads(); }

std::size_t chunk_count(std::size_t n, std::size_t chunk_size) {
  if (chunk_size == 0) chunk_size = 1;
  return (n + chunk_size - 1) / chunk_size;
}

void parallel_for_chunks(std::size_t n, std::size_t chunk_size,
                         const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t chunks = chunk_count(n, chunk_size);
  const int workers = std::min<std::size_t>(effective_threads(), chunks);

  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t begin = c * chunk_size;
      fn(c, begin, std::min(n, begin + chunk_size));
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= chunks) return;
      const std::size_t begin = c * chunk_size;
      fn(c, begin, std::min(n, begin + chunk_size));
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t chunk = std::max<std::size_t>(1, n / (4 * static_cast<std::size_t>(effective_threads())));
  parallel_for_chunks(n, chunk, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace trajnerf
