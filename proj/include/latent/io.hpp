#pragma once

#include <iosfwd>
#include <string>

#include "latent/manifold.hpp"
#include "latent/mapping.hpp"
#include "latent/models.hpp"
#include "latent/sectors.hpp"
#include "latent/tensor.hpp"

namespace latent {

// ---------------------------------------------------------------------------
// Tensor container: magic "LSAT", version u8=1, dtype u8=1 (float32 LE),
// ndim u8, dims u32 LE each, payload raw float bits LE. Round trips are
// bit-exact, including non-finite values.
// ---------------------------------------------------------------------------

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);  // strict: rejects trailing bytes

// ---------------------------------------------------------------------------
// Model container: u32 LE header length, JSON header (kind, dims, layer
// specs, hyperparameters, seed), then one tensor blob per weight/bias in
// header order. load(save(m)) reproduces identical outputs bit for bit.
// ---------------------------------------------------------------------------

void save_model(const std::string& path, const Model& m);
Model load_model(const std::string& path);

// Binary 8-bit PGM (P5); pixel byte = round(255 * value), half away from
// zero. Values must lie in [0,1].
void write_image_pgm(const std::string& path, const Tensor& image);

// Horizontal strip / grid layouts for image batches {k, h, w}.
Tensor image_strip(const Tensor& batch);
Tensor image_grid(const Tensor& batch, std::size_t columns);

// Dataset directory: images.lsat, factors.lsat, manifest.json.
void write_dataset(const std::string& dir, const Dataset& ds);
Dataset read_dataset(const std::string& dir);

void write_support_set(const std::string& path, const SupportSet& set);
SupportSet read_support_set(const std::string& path);

// Map container: u32 LE header length, JSON meta, tensor blob(s).
void save_linear_map(const std::string& path, const LinearMap& map);
LinearMap load_linear_map(const std::string& path);

void write_train_log_csv(const std::string& path, const TrainLog& log);
void write_gain_csv(const std::string& path, const GainReport& report);

void write_eval_report_json(const std::string& path, const PairReport& pair);
void write_matrix_csv(const std::string& path, const MatrixReport& report);
void write_matrix_json(const std::string& path, const MatrixReport& report);

}  // namespace latent
