#include "latent/optim.hpp"

#include <cmath>
#include <string>

#include "latent/errors.hpp"

namespace latent {

OptState make_adam(const std::vector<ParamRef>& params, AdamConfig cfg) {
  OptState s;
  s.cfg = cfg;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const auto& p : params) {
    s.m.emplace_back(p.n, 0.0f);
    s.v.emplace_back(p.n, 0.0f);
  }
  return s;
}

void adam_step(const std::vector<ParamRef>& params, const std::vector<GradRef>& grads, OptState& opt) {
  if (params.size() != grads.size() || params.size() != opt.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient/state count mismatch");
  opt.step += 1;
  float correction1 = 1.0f - std::pow(opt.cfg.beta1, static_cast<float>(opt.step));
  float correction2 = 1.0f - std::pow(opt.cfg.beta2, static_cast<float>(opt.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].n != grads[t].n)
      throw std::invalid_argument("adam_step: gradient size mismatch at tensor " + std::to_string(t));
    float* p = params[t].p;
    const float* g = grads[t].p;
    float* m = opt.m[t].data();
    float* v = opt.v[t].data();
    for (std::size_t i = 0; i < params[t].n; ++i) {
      if (!std::isfinite(g[i]))
        throw TrainingDivergence("adam_step: non-finite gradient in tensor " + std::to_string(t) +
                                 " at element " + std::to_string(i));
      m[i] = opt.cfg.beta1 * m[i] + (1.0f - opt.cfg.beta1) * g[i];
      v[i] = opt.cfg.beta2 * v[i] + (1.0f - opt.cfg.beta2) * g[i] * g[i];
      float mhat = m[i] / correction1;
      float vhat = v[i] / correction2;
      p[i] -= opt.cfg.lr * mhat / (std::sqrt(vhat) + opt.cfg.eps);
    }
  }
}

std::vector<GradRef> grad_refs(const NetGrads<float>& grads) {
  std::vector<GradRef> refs;
  refs.reserve(grads.dw.size() * 2);
  for (std::size_t l = 0; l < grads.dw.size(); ++l) {
    refs.push_back({grads.dw[l].data(), grads.dw[l].size()});
    refs.push_back({grads.db[l].data(), grads.db[l].size()});
  }
  return refs;
}

}  // namespace latent
