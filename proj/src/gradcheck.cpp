#include "latent/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "latent/errors.hpp"
#include "latent/rng.hpp"

namespace latent {

double grad_check_functions(const std::function<double()>& loss,
                            const std::function<std::vector<double>()>& analytic_grad,
                            const std::function<double&(std::size_t)>& param,
                            std::size_t n_params, const GradCheckOptions& opts) {
  if (!(opts.eps > 0.0)) throw std::invalid_argument("grad_check: eps must be > 0");
  std::vector<double> analytic = analytic_grad();
  if (analytic.size() != n_params) throw std::invalid_argument("grad_check: gradient size mismatch");

  std::vector<std::size_t> picks;
  if (n_params <= opts.max_params) {
    picks.resize(n_params);
    for (std::size_t i = 0; i < n_params; ++i) picks[i] = i;
  } else {
    RngState rng = make_rng(derive_seed(opts.seed, 0x6fd7));
    std::vector<bool> taken(n_params, false);
    while (picks.size() < opts.max_params) {
      std::size_t i = static_cast<std::size_t>(rng_next_u64(rng) % n_params);
      if (!taken[i]) {
        taken[i] = true;
        picks.push_back(i);
      }
    }
    std::sort(picks.begin(), picks.end());
  }

  double max_rel = 0.0;
  for (std::size_t i : picks) {
    double& theta = param(i);
    const double saved = theta;
    theta = saved + opts.eps;
    double plus = loss();
    theta = saved - opts.eps;
    double minus = loss();
    theta = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw TrainingDivergence("grad_check: non-finite loss during finite differences");
    double cd = (plus - minus) / (2.0 * opts.eps);
    double denom = std::max({std::abs(analytic[i]), std::abs(cd), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic[i] - cd) / denom);
  }
  return max_rel;
}

double grad_check(const DenseNet& net, const OutputLoss64& loss_fn, const Tensor& input,
                  double eps, const GradCheckOptions& opts) {
  ShadowNet shadow = widen(net);
  auto refs = params_of(shadow);
  std::size_t n_params = 0;
  for (const auto& r : refs) n_params += r.n;

  std::vector<double> x(input.data.begin(), input.data.end());
  const std::size_t batch = input.rows();

  auto loss_only = [&]() {
    FwdCache<double> cache;
    const auto& out = net_forward(view_of(shadow), x.data(), batch, cache);
    double value = loss_fn(out, batch, shadow.output_dim()).first;
    if (!std::isfinite(value)) throw TrainingDivergence("grad_check: non-finite loss");
    return value;
  };
  auto analytic = [&]() {
    FwdCache<double> cache;
    const auto& out = net_forward(view_of(shadow), x.data(), batch, cache);
    auto [value, dout] = loss_fn(out, batch, shadow.output_dim());
    if (!std::isfinite(value)) throw TrainingDivergence("grad_check: non-finite loss");
    NetGrads<double> grads;
    net_backward(view_of(shadow), cache, dout.data(), false, grads);
    std::vector<double> flat;
    flat.reserve(n_params);
    for (std::size_t l = 0; l < grads.dw.size(); ++l) {
      flat.insert(flat.end(), grads.dw[l].begin(), grads.dw[l].end());
      flat.insert(flat.end(), grads.db[l].begin(), grads.db[l].end());
    }
    return flat;
  };
  auto param = [&](std::size_t i) -> double& {
    for (auto& r : refs) {
      if (i < r.n) return r.p[i];
      i -= r.n;
    }
    throw std::out_of_range("grad_check: parameter index");
  };

  GradCheckOptions o = opts;
  o.eps = eps;
  return grad_check_functions(loss_only, analytic, param, n_params, o);
}

OutputLoss64 squared_error_head(const Tensor& target) {
  std::vector<double> t(target.data.begin(), target.data.end());
  return [t](const std::vector<double>& out, std::size_t, std::size_t)
             -> std::pair<double, std::vector<double>> {
    if (out.size() != t.size()) throw std::invalid_argument("squared_error_head: size mismatch");
    double loss = 0.0;
    std::vector<double> grad(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      double d = out[i] - t[i];
      loss += d * d;
      grad[i] = 2.0 * d;
    }
    return {loss, std::move(grad)};
  };
}

}  // namespace latent
