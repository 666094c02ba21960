#pragma once

#include "latent/tensor.hpp"

namespace latent {

// Minimizes |A X - B|^2 + ridge * |X|^2 for A (m x d), B (m x k), returning
// X (d x k). Normal equations assembled and solved in float64 via Cholesky;
// the result is stored as float32. With ridge == 0 a singular system throws
// std::invalid_argument advising a positive ridge.
Tensor solve_least_squares(const Tensor& A, const Tensor& B, double ridge = 0.0);

namespace detail {
// In-place lower Cholesky of a d x d row-major SPD matrix. Returns false when
// a pivot is not safely positive.
bool cholesky_in_place(std::vector<double>& G, std::size_t d);
}  // namespace detail

}  // namespace latent
