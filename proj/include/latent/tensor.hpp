#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace latent {

// Dense row-major float32 array with an explicit shape. The common currency
// for images, latent codes and model parameters.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);
  Tensor(std::initializer_list<std::size_t> s) : Tensor(std::vector<std::size_t>(s)) {}

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<std::size_t> s, float value);

  std::size_t numel() const { return data.size(); }
  std::size_t ndim() const { return shape.size(); }

  // Row/column view: first extent is the row count, remaining extents are
  // collapsed. A {n,16,16} image batch exposes n rows of 256 values.
  std::size_t rows() const;
  std::size_t cols() const;
  float* row(std::size_t i) { return data.data() + i * cols(); }
  const float* row(std::size_t i) const { return data.data() + i * cols(); }

  float& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  float at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

// Throws std::invalid_argument naming `what` if any value is NaN/inf.
void check_finite(const Tensor& t, const char* what);
bool all_finite(const Tensor& t);

// FNV-1a over the raw float bits; used for reproducibility checks.
std::uint64_t fnv1a_bits(const Tensor& t);

// Mean squared difference over all elements, accumulated in 64-bit over
// fixed-size chunks so the result does not depend on thread count.
double mse(const Tensor& a, const Tensor& b);
double mse_span(const float* a, const float* b, std::size_t n);

}  // namespace latent
