#pragma once

#include <vector>

#include "latent/models.hpp"

namespace latent {

// Per-variable reconstruction gains: the increase in mean reconstruction MSE
// when the latent coordinate is forced to zero before decoding. Raw signed
// values; ranked descending, ties broken by ascending variable index.
struct GainReport {
  std::vector<double> gains;             // indexed by variable
  std::vector<std::size_t> order;        // descending gain
  std::vector<double> cumulative_share;  // along `order`; share of total positive gain
  std::size_t dataset_size = 0;
};

double reconstruction_gain(const EncoderDecoder& coder, const Tensor& images, std::size_t var_index);
GainReport rank_variables(const EncoderDecoder& coder, const Tensor& images);

double reconstruction_gain(const Model& m, const Tensor& images, std::size_t var_index);
GainReport rank_variables(const Model& m, const Tensor& images);

struct TopSelection {
  std::vector<std::size_t> indices;
  bool size_warning = false;  // set when 2^n exceeds the requested support-set size
};

// First n variables of the ranking. When support_target > 0, flags
// 2^n > support_target.
TopSelection select_top(const GainReport& report, std::size_t n, std::size_t support_target = 0);

}  // namespace latent
