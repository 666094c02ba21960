#pragma once

#include <cstdint>

#include "latent/tensor.hpp"

namespace latent {

// Counter-based splitmix64 stream. Identical seed gives an identical output
// stream, bit-exact across platforms. Single-owner: never share one state
// between threads; derive child seeds instead.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;
};

inline RngState make_rng(std::uint64_t seed) { return RngState{seed, 0}; }

// One splitmix64 output for an arbitrary 64-bit input.
std::uint64_t splitmix64(std::uint64_t x);

// child_seed = splitmix64(parent_seed XOR stream_index)
std::uint64_t derive_seed(std::uint64_t parent_seed, std::uint64_t stream_index);

std::uint64_t rng_next_u64(RngState& state);

// Uniform in [0, 1) with 53 random bits.
double rng_uniform(RngState& state);
float rng_uniform_range(RngState& state, float lo, float hi);

// Standard normals: splitmix64 uniforms fed to Box-Muller. Values are drawn
// in pairs; the spare of an odd-length request is discarded.
void rng_normal_fill(RngState& state, float* out, std::size_t n);
Tensor rng_normal(RngState& state, std::vector<std::size_t> shape);

}  // namespace latent
