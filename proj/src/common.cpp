#include "avol/common.hpp"

#include <cstdlib>
#include <thread>

namespace avol {

int worker_count() {
  static int cached = [] {
    const char* env = std::getenv("ADAPTIVE_VOLUMES_THREADS");
    int hw = int(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (!env || !*env) return hw;
    int n = std::atoi(env);
    if (n < 1) n = 1;
    return n < hw ? n : hw;
  }();
  return cached;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  int workers = worker_count();
  if (workers <= 1 || n < 1024) {
    fn(0, n);
    return;
  }
  std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  for (std::int64_t begin = 0; begin < n; begin += chunk) {
    std::int64_t end = std::min(n, begin + chunk);
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace avol
