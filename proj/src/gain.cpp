#include "latent/gain.hpp"

#include <algorithm>
#include <stdexcept>

#include "latent/parallel.hpp"

namespace latent {

namespace {

// Gains for a precomputed encoding, one variable at a time. Baseline and
// ablated errors are accumulated per image in float64.
std::vector<double> gains_from_codes(const EncoderDecoder& coder, const Tensor& images,
                                     const Tensor& codes, const std::vector<std::size_t>& vars) {
  const std::size_t n = images.rows();
  const std::size_t cols = images.cols();
  Tensor baseline = coder.decode_fn(codes);
  std::vector<double> base_err(n);
  parallel_for_rows(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) base_err[i] = mse_span(images.row(i), baseline.row(i), cols);
  });

  std::vector<double> gains(vars.size());
  Tensor ablated = codes;
  for (std::size_t vi = 0; vi < vars.size(); ++vi) {
    const std::size_t var = vars[vi];
    for (std::size_t i = 0; i < n; ++i) ablated.at(i, var) = 0.0f;
    Tensor recon = coder.decode_fn(ablated);
    double acc = chunked_sum(n, [&](std::size_t i) {
      return mse_span(images.row(i), recon.row(i), cols) - base_err[i];
    });
    gains[vi] = acc / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) ablated.at(i, var) = codes.at(i, var);
  }
  return gains;
}

}  // namespace

double reconstruction_gain(const EncoderDecoder& coder, const Tensor& images, std::size_t var_index) {
  if (images.rows() == 0) throw std::invalid_argument("reconstruction_gain: empty dataset");
  if (var_index >= coder.latent_dim)
    throw std::invalid_argument("reconstruction_gain: variable index " + std::to_string(var_index) +
                                " out of range for latent dim " + std::to_string(coder.latent_dim));
  Tensor codes = coder.encode_fn(images);
  return gains_from_codes(coder, images, codes, {var_index})[0];
}

GainReport rank_variables(const EncoderDecoder& coder, const Tensor& images) {
  if (images.rows() == 0) throw std::invalid_argument("rank_variables: empty dataset");
  const std::size_t d = coder.latent_dim;
  Tensor codes = coder.encode_fn(images);
  std::vector<std::size_t> vars(d);
  for (std::size_t v = 0; v < d; ++v) vars[v] = v;

  GainReport report;
  report.dataset_size = images.rows();
  report.gains = gains_from_codes(coder, images, codes, vars);
  report.order = vars;
  std::sort(report.order.begin(), report.order.end(), [&](std::size_t a, std::size_t b) {
    if (report.gains[a] != report.gains[b]) return report.gains[a] > report.gains[b];
    return a < b;
  });

  double total_positive = 0.0;
  for (double g : report.gains)
    if (g > 0.0) total_positive += g;
  report.cumulative_share.resize(d);
  double running = 0.0;
  for (std::size_t r = 0; r < d; ++r) {
    double g = report.gains[report.order[r]];
    if (g > 0.0) running += g;
    report.cumulative_share[r] = total_positive > 0.0 ? running / total_positive : 0.0;
  }
  return report;
}

double reconstruction_gain(const Model& m, const Tensor& images, std::size_t var_index) {
  return reconstruction_gain(coder_of(m), images, var_index);
}

GainReport rank_variables(const Model& m, const Tensor& images) {
  return rank_variables(coder_of(m), images);
}

TopSelection select_top(const GainReport& report, std::size_t n, std::size_t support_target) {
  const std::size_t d = report.order.size();
  if (n < 1 || n > d)
    throw std::invalid_argument("select_top: n must be in [1, " + std::to_string(d) + "]");
  TopSelection sel;
  sel.indices.assign(report.order.begin(), report.order.begin() + n);
  if (support_target > 0 && n < 64)
    sel.size_warning = (std::size_t{1} << n) > support_target;
  return sel;
}

}  // namespace latent
