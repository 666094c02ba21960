#pragma once

#include <cstdint>
#include <vector>

#include "latent/nets.hpp"

namespace latent {

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct OptState {
  AdamConfig cfg;
  std::uint64_t step = 0;
  std::vector<std::vector<float>> m, v;  // first/second moments, one entry per parameter tensor
};

OptState make_adam(const std::vector<ParamRef>& params, AdamConfig cfg = {});

struct GradRef {
  const float* p = nullptr;
  std::size_t n = 0;
};

// Standard adaptive-moment update, in place. Throws TrainingDivergence on
// non-finite gradients, naming the offending parameter tensor.
void adam_step(const std::vector<ParamRef>& params, const std::vector<GradRef>& grads, OptState& opt);

std::vector<GradRef> grad_refs(const NetGrads<float>& grads);

}  // namespace latent
