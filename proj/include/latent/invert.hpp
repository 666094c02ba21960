#pragma once

#include <string>
#include <vector>

#include "latent/models.hpp"

namespace latent {

enum class InversionMethod { recoder, gradient, recoder_gradient };

const char* inversion_method_name(InversionMethod m);
InversionMethod inversion_method_from_name(const std::string& name);

struct InvertConfig {
  std::size_t steps = 500;
  double lr = 1.0;           // initial step size; adapted by the line search
  double prior_weight = 0.0; // optional penalty prior_weight * |z|^2
};

struct InversionResult {
  Tensor code;
  double final_image_mse = 0.0;
  std::size_t steps_used = 0;
  InversionMethod method = InversionMethod::gradient;
};

// Minimizes MSE(decode(z), target) (+ prior_weight |z|^2) by gradient steps
// through the decoder, in float64. Step-halving on increase keeps the
// objective trace monotone; `trace`, when given, records the accepted
// objective per step. Deterministic given (init, cfg).
InversionResult invert_gradient(const Model& m, const Tensor& target, const Tensor& init,
                                const InvertConfig& cfg = {}, std::vector<double>* trace = nullptr);

// One recoder forward pass per image.
std::vector<InversionResult> invert_recoder(const Model& m, const Tensor& images);

// Dispatch over the three methods; recoder_gradient chains the recoder output
// into gradient refinement. Pure gradient starts from the zero code.
std::vector<InversionResult> invert_images(const Model& m, const Tensor& images, InversionMethod method,
                                           const InvertConfig& cfg = {});

struct RangeProbeReport {
  double median_in = 0.0;
  double median_out = 0.0;
  double ratio = 0.0;  // out / in
  InversionMethod method = InversionMethod::gradient;
};

// Runs the chosen inversion on both sets and compares median final errors; a
// high ratio flags the probe set as outside the model's generative range.
RangeProbeReport range_probe(const Model& m, const Tensor& in_range, const Tensor& out_range,
                             InversionMethod method = InversionMethod::gradient,
                             const InvertConfig& cfg = {});

}  // namespace latent
