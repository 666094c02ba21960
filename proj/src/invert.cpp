#include "latent/invert.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "latent/errors.hpp"
#include "latent/parallel.hpp"

namespace latent {

const char* inversion_method_name(InversionMethod m) {
  switch (m) {
    case InversionMethod::recoder: return "recoder";
    case InversionMethod::gradient: return "gradient";
    case InversionMethod::recoder_gradient: return "recoder+gradient";
  }
  return "gradient";
}

InversionMethod inversion_method_from_name(const std::string& name) {
  if (name == "recoder") return InversionMethod::recoder;
  if (name == "gradient") return InversionMethod::gradient;
  if (name == "recoder+gradient") return InversionMethod::recoder_gradient;
  throw std::invalid_argument("unknown inversion method: " + name);
}

namespace {

double objective(const DiffDecoder& dec, const std::vector<double>& z, const std::vector<double>& target,
                 double prior_weight, std::vector<double>& x_buf) {
  dec.fwd(z.data(), 1, x_buf);
  double loss = 0.0;
  for (std::size_t i = 0; i < x_buf.size(); ++i) {
    double d = x_buf[i] - target[i];
    loss += d * d;
  }
  loss /= static_cast<double>(x_buf.size());
  if (prior_weight > 0.0) {
    double norm_sq = 0.0;
    for (double v : z) norm_sq += v * v;
    loss += prior_weight * norm_sq;
  }
  return loss;
}

InversionResult invert_gradient_impl(const DiffDecoder& dec, const Tensor& target, const Tensor& init,
                                     const InvertConfig& cfg, InversionMethod tag,
                                     std::vector<double>* trace) {
  if (target.numel() != dec.out_dim) throw std::invalid_argument("invert_gradient: target size mismatch");
  if (init.numel() != dec.latent_dim)
    throw std::invalid_argument("invert_gradient: init width " + std::to_string(init.numel()) +
                                " does not match latent dim " + std::to_string(dec.latent_dim));
  std::vector<double> z(init.data.begin(), init.data.end());
  std::vector<double> t(target.data.begin(), target.data.end());
  std::vector<double> x, dx(dec.out_dim), dz, candidate(z.size());

  double loss = objective(dec, z, t, cfg.prior_weight, x);
  if (!std::isfinite(loss)) throw TrainingDivergence("invert_gradient: non-finite objective");
  if (trace) trace->push_back(loss);

  double lr = cfg.lr;
  const double lr_floor = 1e-12;
  const double lr_ceiling = cfg.lr * 64.0;
  std::size_t steps_used = 0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    // Gradient of the pixel MSE plus the optional prior term.
    dec.fwd(z.data(), 1, x);
    const double scale = 2.0 / static_cast<double>(dec.out_dim);
    for (std::size_t i = 0; i < dec.out_dim; ++i) dx[i] = scale * (x[i] - t[i]);
    dec.vjp(z.data(), 1, dx.data(), dz);
    if (cfg.prior_weight > 0.0)
      for (std::size_t i = 0; i < z.size(); ++i) dz[i] += 2.0 * cfg.prior_weight * z[i];

    // Step-halving line search: accept only non-increasing objectives.
    bool accepted = false;
    while (lr > lr_floor) {
      for (std::size_t i = 0; i < z.size(); ++i) candidate[i] = z[i] - lr * dz[i];
      double cand_loss = objective(dec, candidate, t, cfg.prior_weight, x);
      if (std::isfinite(cand_loss) && cand_loss <= loss) {
        z = candidate;
        loss = cand_loss;
        accepted = true;
        lr = std::min(lr * 1.25, lr_ceiling);
        break;
      }
      lr *= 0.5;
    }
    if (trace) trace->push_back(loss);
    ++steps_used;
    if (!accepted) break;  // step size exhausted, gradient no longer descends
  }

  InversionResult result;
  result.method = tag;
  result.steps_used = steps_used;
  result.code = Tensor({dec.latent_dim});
  for (std::size_t i = 0; i < z.size(); ++i) result.code.data[i] = static_cast<float>(z[i]);
  // Reported error is the pixel MSE alone, without the prior term.
  result.final_image_mse = objective(dec, z, t, 0.0, x);
  return result;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

InversionResult invert_gradient(const Model& m, const Tensor& target, const Tensor& init,
                                const InvertConfig& cfg, std::vector<double>* trace) {
  DiffDecoder dec = make_diff_decoder(m);
  return invert_gradient_impl(dec, target, init, cfg, InversionMethod::gradient, trace);
}

std::vector<InversionResult> invert_recoder(const Model& m, const Tensor& images) {
  Tensor codes = encode(m, images);  // throws if the recoder is missing
  Tensor recon = decode(m, codes);
  std::vector<InversionResult> results(images.rows());
  for (std::size_t i = 0; i < images.rows(); ++i) {
    InversionResult r;
    r.method = InversionMethod::recoder;
    r.steps_used = 0;
    r.code = Tensor({codes.cols()});
    std::copy_n(codes.row(i), codes.cols(), r.code.data.begin());
    r.final_image_mse = mse_span(images.row(i), recon.row(i), images.cols());
    results[i] = std::move(r);
  }
  return results;
}

std::vector<InversionResult> invert_images(const Model& m, const Tensor& images, InversionMethod method,
                                           const InvertConfig& cfg) {
  if (method == InversionMethod::recoder) return invert_recoder(m, images);

  const std::size_t d = model_latent_dim(m);
  Tensor inits({images.rows(), d});
  if (method == InversionMethod::recoder_gradient) {
    Tensor codes = encode(m, images);
    inits.data = codes.data;
  }
  DiffDecoder dec = make_diff_decoder(m);
  std::vector<InversionResult> results(images.rows());
  parallel_for_rows(images.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Tensor target({kImageSide, kImageSide});
      std::copy_n(images.row(i), kImagePixels, target.data.begin());
      Tensor init({d});
      std::copy_n(inits.row(i), d, init.data.begin());
      results[i] = invert_gradient_impl(dec, target, init, cfg, method, nullptr);
    }
  });
  return results;
}

RangeProbeReport range_probe(const Model& m, const Tensor& in_range, const Tensor& out_range,
                             InversionMethod method, const InvertConfig& cfg) {
  if (in_range.rows() == 0 || out_range.rows() == 0)
    throw std::invalid_argument("range_probe: both image sets must be nonempty");
  auto collect = [&](const Tensor& images) {
    std::vector<double> errors;
    for (const auto& r : invert_images(m, images, method, cfg)) errors.push_back(r.final_image_mse);
    return errors;
  };
  RangeProbeReport report;
  report.method = method;
  report.median_in = median(collect(in_range));
  report.median_out = median(collect(out_range));
  report.ratio = report.median_out / report.median_in;
  return report;
}

}  // namespace latent
