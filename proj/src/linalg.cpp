#include "latent/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace latent {

namespace detail {

bool cholesky_in_place(std::vector<double>& G, std::size_t d) {
  double max_diag = 0.0;
  for (std::size_t i = 0; i < d; ++i) max_diag = std::max(max_diag, std::abs(G[i * d + i]));
  const double floor = std::max(max_diag, 1.0) * 1e-13;
  for (std::size_t j = 0; j < d; ++j) {
    double diag = G[j * d + j];
    for (std::size_t k = 0; k < j; ++k) diag -= G[j * d + k] * G[j * d + k];
    if (!(diag > floor)) return false;
    double ljj = std::sqrt(diag);
    G[j * d + j] = ljj;
    for (std::size_t i = j + 1; i < d; ++i) {
      double sum = G[i * d + j];
      for (std::size_t k = 0; k < j; ++k) sum -= G[i * d + k] * G[j * d + k];
      G[i * d + j] = sum / ljj;
    }
  }
  return true;
}

}  // namespace detail

Tensor solve_least_squares(const Tensor& A, const Tensor& B, double ridge) {
  if (A.ndim() != 2 || B.ndim() != 2) throw std::invalid_argument("solve_least_squares: expects 2-d tensors");
  if (A.rows() != B.rows())
    throw std::invalid_argument("solve_least_squares: row mismatch " + shape_str(A.shape) + " vs " +
                                shape_str(B.shape));
  if (ridge < 0.0) throw std::invalid_argument("solve_least_squares: ridge must be >= 0");
  const std::size_t m = A.rows(), d = A.cols(), k = B.cols();

  // G = A^T A + ridge I,  C = A^T B, accumulated in float64.
  std::vector<double> G(d * d, 0.0), C(d * k, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const float* ai = A.row(i);
    const float* bi = B.row(i);
    for (std::size_t r = 0; r < d; ++r) {
      double ar = ai[r];
      if (ar == 0.0) continue;
      double* Gr = G.data() + r * d;
      for (std::size_t c = r; c < d; ++c) Gr[c] += ar * ai[c];
      double* Cr = C.data() + r * k;
      for (std::size_t c = 0; c < k; ++c) Cr[c] += ar * bi[c];
    }
  }
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < r; ++c) G[r * d + c] = G[c * d + r];
  for (std::size_t i = 0; i < d; ++i) G[i * d + i] += ridge;

  if (!detail::cholesky_in_place(G, d)) {
    if (ridge == 0.0)
      throw std::invalid_argument(
          "solve_least_squares: A^T A is singular; pass a positive ridge to regularize");
    throw std::runtime_error("solve_least_squares: normal equations not positive definite");
  }

  // Solve L y = C, then L^T x = y, column by column.
  std::vector<double> x(d);
  Tensor X({d, k});
  for (std::size_t col = 0; col < k; ++col) {
    for (std::size_t i = 0; i < d; ++i) {
      double sum = C[i * k + col];
      const double* Li = G.data() + i * d;
      for (std::size_t j = 0; j < i; ++j) sum -= Li[j] * x[j];
      x[i] = sum / Li[i];
    }
    for (std::size_t i = d; i-- > 0;) {
      double sum = x[i];
      for (std::size_t j = i + 1; j < d; ++j) sum -= G[j * d + i] * x[j];
      x[i] = sum / G[i * d + i];
    }
    for (std::size_t i = 0; i < d; ++i) X.at(i, col) = static_cast<float>(x[i]);
  }
  return X;
}

}  // namespace latent
