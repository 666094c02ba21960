#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "latent/mapping.hpp"
#include "latent/models.hpp"
#include "latent/sectors.hpp"

namespace latent {

// One models[] entry of a run config: a model kind trained once per seed.
struct ModelSpec {
  std::string kind;  // vae | svae | gan | styleproxy
  std::size_t latent_dim = 16;
  std::vector<std::uint64_t> seeds;
  // vae/svae
  float gamma = 0.002f;
  float lr = 1e-3f;
  // gan/styleproxy
  float lr_g = 4e-4f;
  float lr_d = 4e-4f;
  GanLoss loss = GanLoss::least_squares;
  std::size_t recoder_steps = 3000;
  float recoder_lr = 1e-3f;
  // shared
  std::size_t epochs = 40;
  std::size_t batch = 128;
};

struct RunConfig {
  std::uint64_t dataset_seed = 42;
  std::size_t dataset_n = 8000;
  std::vector<ModelSpec> models;
  SupportSetParams support;
  bool fit_on_support = true;
  MapFitOptions mapping;
  std::string map_method = "closed-form";  // or "minibatch"
  std::size_t eval_images = 1000;
};

// Parses and validates a config document. Unknown keys are rejected with an
// error naming the offending key path.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);
ModelSpec default_model_spec(const std::string& kind);

Model train_from_spec(const Dataset& dataset, const ModelSpec& spec, std::uint64_t seed,
                      TrainLog& log);

// The full study: dataset, model zoo, feature ranking, support set, all
// pairwise maps, reports and figure sheets, written under out_dir. Returns the
// machine-readable summary (also stored as summary.json, without timings).
nlohmann::json run_matrix_pipeline(const RunConfig& cfg, const std::string& out_dir,
                                   std::ostream& log);

}  // namespace latent
