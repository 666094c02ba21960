#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>

#include "latent/losses.hpp"
#include "latent/manifold.hpp"
#include "latent/nets.hpp"
#include "latent/rng.hpp"

namespace latent {

// ---------------------------------------------------------------------------
// Model types. All are immutable after training; encode/decode/sample are
// pure. VAE and SVAE encode with the posterior mean, GAN and the style proxy
// encode through their recoders.
// ---------------------------------------------------------------------------

struct VaeModel {
  DenseNet encoder;  // 256 -> ... -> 2d (mean | log-variance)
  DenseNet decoder;  // d -> ... -> 256, sigmoid output
  std::size_t latent_dim = 0;
  float gamma = 0.0f;
  std::uint64_t seed = 0;
};

struct SvaeModel {
  DenseNet encoder;
  DenseNet decoder;  // d -> ... -> 3*256 logits (x1 | x2 | sigma)
  std::size_t latent_dim = 0;
  float gamma = 0.0f;
  std::uint64_t seed = 0;
};

struct GanModel {
  DenseNet generator;  // d -> ... -> 256, sigmoid
  DenseNet discriminator;
  std::optional<DenseNet> recoder;  // 256 -> ... -> d, present once trained
  std::size_t latent_dim = 0;
  GanLoss loss = GanLoss::least_squares;
  std::uint64_t seed = 0;
};

// Two-space generator: a nonlinear mapping net turns the prior code z into an
// intermediate style code w, a synthesis net decodes w. encode/decode operate
// on the w space; ancestral sampling passes through the mapping net.
struct StyleProxyModel {
  DenseNet mapping_net;  // d -> ... -> d, leaky-relu hidden layers
  DenseNet synthesis;    // d -> ... -> 256, sigmoid
  DenseNet w_recoder;    // 256 -> ... -> d
  bool recoder_trained = false;
  std::size_t latent_dim = 0;
  std::uint64_t seed = 0;
};

using Model = std::variant<VaeModel, SvaeModel, GanModel, StyleProxyModel>;

std::string model_kind(const Model& m);
std::uint64_t model_seed(const Model& m);
std::string model_id(const Model& m);  // "<kind>:<seed>"
std::size_t model_latent_dim(const Model& m);

struct TrainLog {
  std::uint64_t seed = 0;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> epochs;  // one row per epoch, first value is the epoch index
  double wall_seconds = 0.0;
  double held_out_mse = std::numeric_limits<double>::quiet_NaN();
};

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

struct VaeTrainConfig {
  std::size_t latent_dim = 16;
  float gamma = 0.002f;
  std::size_t epochs = 40;
  float lr = 1e-3f;
  std::size_t batch = 128;
  std::uint64_t seed = 0;
};

struct GanTrainConfig {
  std::size_t latent_dim = 16;
  std::size_t epochs = 40;
  float lr_g = 4e-4f;
  float lr_d = 4e-4f;
  GanLoss loss = GanLoss::least_squares;
  std::size_t batch = 128;
  std::uint64_t seed = 0;
};

struct StyleProxyTrainConfig {
  std::size_t latent_dim = 32;
  std::size_t epochs = 40;
  float lr_g = 4e-4f;
  float lr_d = 4e-4f;
  std::size_t batch = 128;
  std::uint64_t seed = 0;
};

struct RecoderTrainConfig {
  std::size_t steps = 3000;
  std::size_t batch = 128;
  float lr = 1e-3f;
  std::uint64_t seed = 0;
};

std::pair<VaeModel, TrainLog> train_vae(const Dataset& dataset, const VaeTrainConfig& cfg);
std::pair<SvaeModel, TrainLog> train_svae(const Dataset& dataset, const VaeTrainConfig& cfg);
std::pair<GanModel, TrainLog> train_gan(const Dataset& dataset, const GanTrainConfig& cfg);
std::pair<StyleProxyModel, TrainLog> train_style_proxy(const Dataset& dataset,
                                                       const StyleProxyTrainConfig& cfg);

// Continues adversarial training of an existing model; train_gan is
// init + this loop. Throws TrainingDivergence when the generated-batch pixel
// variance stays below 1e-4 for 5 consecutive epochs (mode collapse) or a
// loss goes non-finite.
void gan_train_loop(GanModel& model, const Dataset& dataset, const GanTrainConfig& cfg, TrainLog& log);

// Trains the recoder on freshly sampled (code, image) pairs: z for a GAN,
// w for the style proxy. The generator must already be trained.
TrainLog train_recoder(GanModel& model, const RecoderTrainConfig& cfg);
TrainLog train_recoder(StyleProxyModel& model, const RecoderTrainConfig& cfg);

// Seeded architecture builders (fresh, untrained).
VaeModel make_vae(std::size_t latent_dim, float gamma, std::uint64_t seed);
SvaeModel make_svae(std::size_t latent_dim, float gamma, std::uint64_t seed);
GanModel make_gan(std::size_t latent_dim, GanLoss loss, std::uint64_t seed);
StyleProxyModel make_style_proxy(std::size_t latent_dim, std::uint64_t seed);
DenseNet make_recoder_net(std::size_t latent_dim, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Inference.
// ---------------------------------------------------------------------------

Tensor encode(const Model& m, const Tensor& images);  // one d-wide code per image
Tensor decode(const Model& m, const Tensor& codes);   // one image per code
Tensor sample_ancestral(const Model& m, RngState& rng, std::size_t n);
double reconstruction_mse(const Model& m, const Tensor& images);

// Decodes `steps` copies of z with coordinate var_index swept over
// [lo, hi]; steps == 1 uses lo.
Tensor latent_traversal(const Model& m, const Tensor& z, std::size_t var_index, float lo = -2.25f,
                        float hi = 2.25f, std::size_t steps = 11);

// xhat = sigma.x1 + (1-sigma).x2, elementwise.
Tensor svae_combine(const Tensor& x1, const Tensor& x2, const Tensor& sigma);

// Fraction of correct real/fake calls on a balanced batch.
double discriminator_accuracy(const GanModel& m, const Tensor& real_images, RngState& rng);

// Type-erased encode/decode pair; lets metrics run on hand-built toy coders.
struct EncoderDecoder {
  std::size_t latent_dim = 0;
  std::function<Tensor(const Tensor&)> encode_fn;
  std::function<Tensor(const Tensor&)> decode_fn;
};
EncoderDecoder coder_of(const Model& m);

// Float64 decode path with a vector-Jacobian product, for gradient-based
// inversion and its finite-difference checks.
struct DiffDecoder {
  std::size_t latent_dim = 0;
  std::size_t out_dim = 0;
  std::function<void(const double* z, std::size_t m, std::vector<double>& x)> fwd;
  std::function<void(const double* z, std::size_t m, const double* dx, std::vector<double>& dz)> vjp;
};
DiffDecoder make_diff_decoder(const Model& m);

}  // namespace latent
