#include "latent/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace latent {

namespace {
std::atomic<unsigned> g_threads{1};
constexpr std::size_t kChunk = 1024;
}  // namespace

void set_worker_threads(unsigned n) { g_threads.store(n == 0 ? 1 : n); }
unsigned worker_threads() { return g_threads.load(); }

void parallel_for_rows(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  unsigned workers = worker_threads();
  if (workers <= 1 || n < 2 * kChunk) {
    body(0, n);
    return;
  }
  std::size_t per = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) {
    std::size_t begin = t * per;
    if (begin >= n) break;
    std::size_t end = std::min(n, begin + per);
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  for (auto& th : pool) th.join();
}

double chunked_sum(std::size_t n, const std::function<double(std::size_t)>& term) {
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(n_chunks, 0.0);
  parallel_for_rows(n_chunks, [&](std::size_t c0, std::size_t c1) {
    for (std::size_t c = c0; c < c1; ++c) {
      std::size_t begin = c * kChunk;
      std::size_t end = std::min(n, begin + kChunk);
      double acc = 0.0;
      for (std::size_t i = begin; i < end; ++i) acc += term(i);
      partial[c] = acc;
    }
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace latent
