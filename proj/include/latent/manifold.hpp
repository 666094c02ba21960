#pragma once

#include <array>
#include <cstdint>

#include "latent/rng.hpp"
#include "latent/tensor.hpp"

namespace latent {

inline constexpr std::size_t kImageSide = 16;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;
inline constexpr std::size_t kFactorCount = 6;

// Generative factors of one Gaussian blob image.
struct BlobFactors {
  float cx, cy;  // center
  float r;       // radius
  float a;       // foreground intensity
  float b;       // background level
  float e;       // elongation
};

struct FactorRange {
  float lo, hi;
};

inline constexpr std::array<FactorRange, kFactorCount> kFactorRanges = {{
    {0.2f, 0.8f},    // cx
    {0.2f, 0.8f},    // cy
    {0.08f, 0.30f},  // r
    {0.5f, 1.0f},    // a
    {0.0f, 0.3f},    // b
    {0.5f, 2.0f},    // e
}};

inline constexpr std::array<const char*, kFactorCount> kFactorNames = {"cx", "cy", "r", "a", "b", "e"};

// pixel(px,py) = clamp(b + a*exp(-((u-cx)^2*e + (v-cy)^2/e) / (2 r^2)), 0, 1)
// with u = (px+0.5)/16, v = (py+0.5)/16. Throws on out-of-range factors.
Tensor render_blob(const BlobFactors& f);

BlobFactors factors_from_row(const float* row);

// Each factor uniform over its declared range; row-major draw order.
Tensor sample_factors(RngState& rng, std::size_t n);

struct Dataset {
  Tensor images;   // n x 16 x 16, values in [0,1]
  Tensor factors;  // n x 6
  std::uint64_t seed = 0;
  std::size_t size() const { return images.shape.empty() ? 0 : images.shape[0]; }
};

Dataset make_dataset(std::uint64_t seed, std::size_t n);

// Intensity-inverted copies (1 - image) of the first k dataset images; their
// background level sits at >= 0.7 where the manifold caps it at 0.3, so they
// lie outside the generative range by construction.
Tensor out_of_range_probe_set(const Dataset& dataset, std::size_t k);

// Mean over unordered pairs of per-pixel MSE, over the first `limit` rows
// (0 = all). The dataset diversity baseline.
double mean_pairwise_mse(const Tensor& images, std::size_t limit = 0);

double mean_pixel_value(const Tensor& images);

}  // namespace latent
