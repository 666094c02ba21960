#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "latent/models.hpp"
#include "latent/sectors.hpp"
#include "latent/tensor.hpp"

namespace latent {

struct MapFitMeta {
  std::string method = "closed-form";  // or "minibatch"
  double ridge = 1e-4;
  std::string fit_data = "full-data";  // or "support:<ref>"
  std::size_t n_fit = 0;
};

// The affine map between two latent spaces: codes_dst = A codes_src (+ bias).
struct LinearMap {
  Tensor A;  // dst_dim x src_dim
  std::optional<Tensor> bias;
  std::string src_model_id, dst_model_id;
  MapFitMeta meta;
  std::size_t src_dim() const { return A.shape[1]; }
  std::size_t dst_dim() const { return A.shape[0]; }
};

struct MapFitOptions {
  bool bias = false;  // no-bias default
  double ridge = 1e-4;
};

// Minimizes mean |A z1 (+b) - z2|^2 + ridge |A|^2 over matched rows; the bias,
// when requested, is not penalized.
LinearMap fit_linear_map(const Tensor& z1, const Tensor& z2, const MapFitOptions& opts = {});

struct MinibatchOptions {
  std::size_t steps = 2000;
  std::size_t batch = 128;
  float lr = 0.01f;
  bool bias = false;
  std::uint64_t seed = 0;
};

// Fills two matched batches of codes; called once per optimization step.
using PairSampler = std::function<void(std::size_t batch, Tensor& z1, Tensor& z2)>;

struct MinibatchFitResult {
  LinearMap map;
  double train_l_mse = 0.0;  // per-component, averaged over the last logged window
};

MinibatchFitResult fit_linear_map_minibatch(const PairSampler& sampler, std::size_t src_dim,
                                            std::size_t dst_dim, const MinibatchOptions& opts = {});

Tensor apply_map(const LinearMap& map, const Tensor& codes);
LinearMap identity_map(std::size_t dim);

// Mean |A z1 (+b) - z2|^2 / dst_dim over rows.
double map_l_mse(const LinearMap& map, const Tensor& z1, const Tensor& z2);

struct EvalReport {
  double l_mse = 0;      // per destination component
  double l_mse_raw = 0;  // summed over destination components
  double r_mse = 0;      // source-model reconstruction error
  double m_mse = 0;      // error after mapping + destination decode
  std::size_t n_eval = 0;
};

EvalReport evaluate_mapping(const EncoderDecoder& src, const EncoderDecoder& dst,
                            const LinearMap& map, const Tensor& images);
EvalReport evaluate_mapping(const Model& src, const Model& dst, const LinearMap& map,
                            const Tensor& images);

// Relocation type: 0 self (identity map), 1 same kind across seeds, 2 same
// objective across architectures, 3 across objectives.
int relocation_type(const std::string& from_kind, const std::string& to_kind, bool same_instance);

struct ModelEntry {
  std::string id;
  std::string kind;
  const Model* model = nullptr;
};

struct PairReport {
  std::string from_id, to_id, from_kind, to_kind;
  int type = 0;
  EvalReport eval;
  double support_l_mse = 0.0;  // l_mse on the fit rows
  LinearMap map;
};

struct MatrixRow {
  std::string from_kind, to_kind;
  int type = 0;
  double l_mean = 0, l_std = 0, r_mean = 0, r_std = 0, m_mean = 0, m_std = 0;
  std::size_t pairs = 0;
};

struct MatrixReport {
  std::vector<PairReport> pairs;
  std::vector<MatrixRow> rows;  // aggregated per (from_kind, to_kind)
  std::string fit_data;
};

// Fits and evaluates every ordered model pair. Maps are fit on the support
// subset of `dataset_images` when given, otherwise on all of them; the
// diagonal (same instance) uses identity maps.
MatrixReport run_type_matrix(std::span<const ModelEntry> models, const Tensor& dataset_images,
                             const std::optional<SupportSet>& support, const Tensor& eval_images,
                             const MapFitOptions& opts = {});

}  // namespace latent
