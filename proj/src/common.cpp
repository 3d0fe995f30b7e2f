#include "uvsplat/common.hpp"

#include <algorithm>
#include <atomic>

namespace uvsplat {

namespace {

std::atomic<int> g_thread_count{0};  // 0 = not set yet

}  // namespace

int thread_count() {
  int n = g_thread_count.load(std::memory_order_relaxed);
  if (n > 0) return n;
  n = int(std::thread::hardware_concurrency());
  return n > 0 ? n : 1;
}

void set_thread_count(int n) { g_thread_count.store(std::max(0, n), std::memory_order_relaxed); }

}  // namespace uvsplat
