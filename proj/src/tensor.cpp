#include "latent/tensor.hpp"

#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace latent {

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
  data.assign(shape_numel(shape), 0.0f);
}

Tensor Tensor::full(std::vector<std::size_t> s, float value) {
  Tensor t(std::move(s));
  t.data.assign(t.data.size(), value);
  return t;
}

std::size_t Tensor::rows() const {
  if (shape.empty()) throw std::invalid_argument("rows() on a shapeless tensor");
  return shape[0];
}

std::size_t Tensor::cols() const {
  std::size_t r = rows();
  return r == 0 ? 0 : numel() / r;
}

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = shape.empty() ? 0 : 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool all_finite(const Tensor& t) {
  for (float v : t.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void check_finite(const Tensor& t, const char* what) {
  if (!all_finite(t)) throw std::invalid_argument(std::string(what) + ": non-finite values");
}

std::uint64_t fnv1a_bits(const Tensor& t) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 1099511628211ull;
  };
  for (std::size_t extent : t.shape) {
    for (int i = 0; i < 8; ++i) mix(static_cast<std::uint8_t>(extent >> (8 * i)));
  }
  for (float v : t.data) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) mix(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return h;
}

double mse_span(const float* a, const float* b, std::size_t n) {
  constexpr std::size_t kChunk = 1024;
  double total = 0.0;
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    std::size_t end = begin + kChunk < n ? begin + kChunk : n;
    double part = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
      part += d * d;
    }
    total += part;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

double mse(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel())
    throw std::invalid_argument("mse: size mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  return mse_span(a.data.data(), b.data.data(), a.numel());
}

}  // namespace latent
