#include "latent/manifold.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "latent/parallel.hpp"

namespace latent {

namespace {

void check_factor(float value, std::size_t index) {
  const auto& range = kFactorRanges[index];
  if (!(value >= range.lo && value <= range.hi))
    throw std::invalid_argument(std::string("blob factor ") + kFactorNames[index] + "=" +
                                std::to_string(value) + " outside [" + std::to_string(range.lo) +
                                ", " + std::to_string(range.hi) + "]");
}

}  // namespace

Tensor render_blob(const BlobFactors& f) {
  const float values[kFactorCount] = {f.cx, f.cy, f.r, f.a, f.b, f.e};
  for (std::size_t i = 0; i < kFactorCount; ++i) check_factor(values[i], i);

  Tensor image({kImageSide, kImageSide});
  const float inv_two_r2 = 1.0f / (2.0f * f.r * f.r);
  for (std::size_t py = 0; py < kImageSide; ++py) {
    const float v = (static_cast<float>(py) + 0.5f) / static_cast<float>(kImageSide);
    for (std::size_t px = 0; px < kImageSide; ++px) {
      const float u = (static_cast<float>(px) + 0.5f) / static_cast<float>(kImageSide);
      const float du = u - f.cx;
      const float dv = v - f.cy;
      const float q = (du * du * f.e + dv * dv / f.e) * inv_two_r2;
      float value = f.b + f.a * std::exp(-q);
      image.at(py, px) = value < 0.0f ? 0.0f : (value > 1.0f ? 1.0f : value);
    }
  }
  return image;
}

BlobFactors factors_from_row(const float* row) {
  return BlobFactors{row[0], row[1], row[2], row[3], row[4], row[5]};
}

Tensor sample_factors(RngState& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample_factors: n must be >= 1");
  Tensor factors({n, kFactorCount});
  for (std::size_t i = 0; i < n; ++i) {
    float* row = factors.row(i);
    for (std::size_t j = 0; j < kFactorCount; ++j)
      row[j] = rng_uniform_range(rng, kFactorRanges[j].lo, kFactorRanges[j].hi);
  }
  return factors;
}

Dataset make_dataset(std::uint64_t seed, std::size_t n) {
  RngState rng = make_rng(seed);
  Dataset ds;
  ds.seed = seed;
  ds.factors = sample_factors(rng, n);
  ds.images = Tensor({n, kImageSide, kImageSide});
  for (std::size_t i = 0; i < n; ++i) {
    Tensor image = render_blob(factors_from_row(ds.factors.row(i)));
    std::copy(image.data.begin(), image.data.end(), ds.images.row(i));
  }
  return ds;
}

Tensor out_of_range_probe_set(const Dataset& dataset, std::size_t k) {
  if (k > dataset.size()) throw std::invalid_argument("out_of_range_probe_set: k exceeds dataset size");
  Tensor probes({k, kImageSide, kImageSide});
  for (std::size_t i = 0; i < k; ++i) {
    const float* src = dataset.images.row(i);
    float* dst = probes.row(i);
    for (std::size_t p = 0; p < kImagePixels; ++p) dst[p] = 1.0f - src[p];
  }
  return probes;
}

double mean_pairwise_mse(const Tensor& images, std::size_t limit) {
  std::size_t n = images.rows();
  if (limit != 0 && limit < n) n = limit;
  if (n < 2) throw std::invalid_argument("mean_pairwise_mse: need at least 2 images");
  const std::size_t cols = images.cols();
  // Per-anchor partials summed in index order keep the result independent of
  // any evaluation parallelism.
  std::vector<double> partial(n - 1, 0.0);
  parallel_for_rows(n - 1, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double acc = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) acc += mse_span(images.row(i), images.row(j), cols);
      partial[i] = acc;
    }
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total / static_cast<double>(n * (n - 1) / 2);
}

double mean_pixel_value(const Tensor& images) {
  return chunked_sum(images.numel(), [&](std::size_t i) { return images.data[i]; }) /
         static_cast<double>(images.numel());
}

}  // namespace latent
