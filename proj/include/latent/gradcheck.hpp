#pragma once

#include <functional>

#include "latent/nets.hpp"

namespace latent {

struct GradCheckOptions {
  double eps = 1e-4;
  std::size_t max_params = 200;  // central differences evaluated on at most this many parameters
  std::uint64_t seed = 0;        // selects the sampled subset when the parameter count exceeds max_params
};

// Compares an analytic gradient against central finite differences, all in
// float64. `param(i)` must expose mutable access to the i-th parameter;
// `loss()` re-evaluates the objective at the current parameters. Returns
// max over checked parameters of |analytic - cd| / max(|analytic|, |cd|, 1e-8).
// Throws TrainingDivergence if the loss is non-finite.
double grad_check_functions(const std::function<double()>& loss,
                            const std::function<std::vector<double>()>& analytic_grad,
                            const std::function<double&(std::size_t)>& param,
                            std::size_t n_params, const GradCheckOptions& opts = {});

// Loss head applied to a network output: returns (loss, dLoss/dOutput).
using OutputLoss64 =
    std::function<std::pair<double, std::vector<double>>(const std::vector<double>& output,
                                                         std::size_t batch, std::size_t out_dim)>;

// Checks d loss / d params of a single dense network on a fixed input batch,
// via a float64 shadow copy.
double grad_check(const DenseNet& net, const OutputLoss64& loss_fn, const Tensor& input,
                  double eps = 1e-4, const GradCheckOptions& opts = {});

// Mean squared error head against a fixed target, for grad_check.
OutputLoss64 squared_error_head(const Tensor& target);

}  // namespace latent
