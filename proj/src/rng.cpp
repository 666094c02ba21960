#include "latent/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace latent {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t splitmix64(std::uint64_t x) { return mix(x + kGolden); }

std::uint64_t derive_seed(std::uint64_t parent_seed, std::uint64_t stream_index) {
  return splitmix64(parent_seed ^ stream_index);
}

std::uint64_t rng_next_u64(RngState& state) {
  state.counter += 1;
  return mix(state.seed + state.counter * kGolden);
}

double rng_uniform(RngState& state) {
  return static_cast<double>(rng_next_u64(state) >> 11) * 0x1.0p-53;
}

float rng_uniform_range(RngState& state, float lo, float hi) {
  return static_cast<float>(lo + (static_cast<double>(hi) - lo) * rng_uniform(state));
}

void rng_normal_fill(RngState& state, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; i += 2) {
    // u1 in (0,1] so log is finite; u2 in [0,1).
    double u1 = static_cast<double>((rng_next_u64(state) >> 11) + 1) * 0x1.0p-53;
    double u2 = rng_uniform(state);
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    out[i] = static_cast<float>(radius * std::cos(angle));
    if (i + 1 < n) out[i + 1] = static_cast<float>(radius * std::sin(angle));
  }
}

Tensor rng_normal(RngState& state, std::vector<std::size_t> shape) {
  if (shape.empty()) throw std::invalid_argument("rng_normal: shape must be non-empty");
  Tensor t(std::move(shape));
  rng_normal_fill(state, t.data.data(), t.numel());
  return t;
}

}  // namespace latent
