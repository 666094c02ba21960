#pragma once

#include <cstddef>
#include <functional>

namespace latent {

// Worker count for batch evaluation. Training paths stay single-threaded;
// results are independent of the worker count by construction (fixed
// chunking, ordered reduction).
void set_worker_threads(unsigned n);
unsigned worker_threads();

// Splits [0, n) into contiguous blocks, one per worker.
void parallel_for_rows(std::size_t n, const std::function<void(std::size_t begin, std::size_t end)>& body);

// Sum of term(i) for i in [0, n), accumulated in float64 over fixed 1024-wide
// chunks combined in index order.
double chunked_sum(std::size_t n, const std::function<double(std::size_t)>& term);

}  // namespace latent
