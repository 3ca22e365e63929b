#include "laghawkes/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace laghawkes {

namespace {
std::atomic<int> g_threads{0};

int default_threads() {
  if (const char* env = std::getenv("LAGHAWKES_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}
}  // namespace

int thread_count() {
  const int n = g_threads.load();
  return n > 0 ? n : default_threads();
}

void set_thread_count(int n) { g_threads.store(n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f) {
  const int workers = thread_count();
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        f(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(workers)));
  pool.reserve(static_cast<std::size_t>(count - 1));
  for (int i = 1; i < count; ++i) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace laghawkes
