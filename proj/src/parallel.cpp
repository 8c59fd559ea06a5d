#include "saferec/parallel.hpp"

#include <atomic>

namespace saferec {

namespace {
std::atomic<std::size_t> g_workers{0};
}

std::size_t worker_count() {
  const std::size_t n = g_workers.load(std::memory_order_relaxed);
  if (n > 0) return n;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void set_worker_count(std::size_t n) { g_workers.store(n, std::memory_order_relaxed); }

}  // namespace saferec
