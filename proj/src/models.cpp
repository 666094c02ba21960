#include "latent/models.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>

#include "latent/errors.hpp"
#include "latent/optim.hpp"
#include "latent/parallel.hpp"

namespace latent {

namespace {

constexpr std::size_t kHidden = 128;
constexpr Act kLeaky = Act::leaky_relu;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Named sub-streams of a training seed.
enum Stream : std::uint64_t {
  kInitA = 1,
  kInitB = 2,
  kShuffle = 3,
  kNoise = 4,
  kProbe = 5,
  kInitC = 6,
};

std::vector<std::size_t> shuffled_indices(std::size_t n, RngState& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng_next_u64(rng) % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

void gather_rows(const Tensor& src, const std::vector<std::size_t>& idx, std::size_t begin,
                 std::size_t end, std::vector<float>& out) {
  const std::size_t cols = src.cols();
  out.resize((end - begin) * cols);
  for (std::size_t i = begin; i < end; ++i)
    std::copy_n(src.row(idx[i]), cols, out.data() + (i - begin) * cols);
}

std::size_t holdout_count(std::size_t n) { return n >= 10 ? n / 10 : (n >= 2 ? 1 : 0); }

// Runs a net over rows of `input`, splitting across evaluation workers.
Tensor run_net(const DenseNet& net, const Tensor& input) {
  if (input.rows() == 0) return Tensor({0, net.output_dim()});
  if (input.cols() != net.input_dim())
    throw std::invalid_argument("net input width " + std::to_string(input.cols()) +
                                " does not match expected " + std::to_string(net.input_dim()));
  const std::size_t m = input.rows();
  Tensor out({m, net.output_dim()});
  NetView<float> v = view_of(net);
  parallel_for_rows(m, [&](std::size_t begin, std::size_t end) {
    if (begin == end) return;
    FwdCache<float> cache;
    const auto& y = net_forward(v, input.row(begin), end - begin, cache);
    std::copy(y.begin(), y.end(), out.row(begin));
  });
  return out;
}

Tensor images_as_rows(const Tensor& images) {
  if (images.rows() != 0 && images.cols() != kImagePixels)
    throw std::invalid_argument("expected 16x16 images, got rows of width " +
                                std::to_string(images.cols()));
  Tensor flat({images.rows(), kImagePixels});
  flat.data = images.data;
  return flat;
}

Tensor to_images(Tensor rows) {
  Tensor imgs({rows.rows(), kImageSide, kImageSide});
  imgs.data = std::move(rows.data);
  return imgs;
}

Tensor svae_decode_rows(const SvaeModel& m, const Tensor& codes) {
  Tensor logits = run_net(m.decoder, codes);
  const std::size_t n = codes.rows();
  Tensor out({n, kImagePixels});
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = logits.row(i);
    float* dst = out.row(i);
    for (std::size_t p = 0; p < kImagePixels; ++p) {
      float x1 = 1.0f / (1.0f + std::exp(-row[p]));
      float x2 = 1.0f / (1.0f + std::exp(-row[kImagePixels + p]));
      float sg = 1.0f / (1.0f + std::exp(-row[2 * kImagePixels + p]));
      dst[p] = sg * x1 + (1.0f - sg) * x2;
    }
  }
  return out;
}

Tensor posterior_mean(const DenseNet& encoder, const Tensor& images, std::size_t d) {
  Tensor enc_out = run_net(encoder, images_as_rows(images));
  Tensor mu({enc_out.rows(), d});
  for (std::size_t i = 0; i < enc_out.rows(); ++i) std::copy_n(enc_out.row(i), d, mu.row(i));
  return mu;
}

double image_recon_mse(const Tensor& images, const Tensor& recon_rows) {
  return mse_span(images.data.data(), recon_rows.data.data(), images.numel());
}

}  // namespace

// ---------------------------------------------------------------------------
// Builders.
// ---------------------------------------------------------------------------

VaeModel make_vae(std::size_t latent_dim, float gamma, std::uint64_t seed) {
  if (latent_dim == 0) throw std::invalid_argument("latent_dim must be positive");
  RngState enc_rng = make_rng(derive_seed(seed, kInitA));
  RngState dec_rng = make_rng(derive_seed(seed, kInitB));
  VaeModel m;
  m.encoder = make_dense_net({kImagePixels, kHidden, kHidden, 2 * latent_dim},
                             {kLeaky, kLeaky, Act::identity}, enc_rng);
  m.decoder = make_dense_net({latent_dim, kHidden, kHidden, kImagePixels},
                             {kLeaky, kLeaky, Act::sigmoid}, dec_rng);
  m.latent_dim = latent_dim;
  m.gamma = gamma;
  m.seed = seed;
  return m;
}

SvaeModel make_svae(std::size_t latent_dim, float gamma, std::uint64_t seed) {
  if (latent_dim == 0) throw std::invalid_argument("latent_dim must be positive");
  RngState enc_rng = make_rng(derive_seed(seed, kInitA));
  RngState dec_rng = make_rng(derive_seed(seed, kInitB));
  SvaeModel m;
  m.encoder = make_dense_net({kImagePixels, kHidden, kHidden, 2 * latent_dim},
                             {kLeaky, kLeaky, Act::identity}, enc_rng);
  m.decoder = make_dense_net({latent_dim, kHidden, kHidden, 3 * kImagePixels},
                             {kLeaky, kLeaky, Act::identity}, dec_rng);
  m.latent_dim = latent_dim;
  m.gamma = gamma;
  m.seed = seed;
  return m;
}

GanModel make_gan(std::size_t latent_dim, GanLoss loss, std::uint64_t seed) {
  if (latent_dim == 0) throw std::invalid_argument("latent_dim must be positive");
  RngState gen_rng = make_rng(derive_seed(seed, kInitA));
  RngState disc_rng = make_rng(derive_seed(seed, kInitB));
  GanModel m;
  m.generator = make_dense_net({latent_dim, kHidden, kHidden, kImagePixels},
                               {kLeaky, kLeaky, Act::sigmoid}, gen_rng);
  m.discriminator =
      make_dense_net({kImagePixels, kHidden, kHidden, 1}, {kLeaky, kLeaky, Act::identity}, disc_rng);
  m.latent_dim = latent_dim;
  m.loss = loss;
  m.seed = seed;
  return m;
}

StyleProxyModel make_style_proxy(std::size_t latent_dim, std::uint64_t seed) {
  if (latent_dim == 0) throw std::invalid_argument("latent_dim must be positive");
  RngState map_rng = make_rng(derive_seed(seed, kInitA));
  RngState syn_rng = make_rng(derive_seed(seed, kInitB));
  RngState rec_rng = make_rng(derive_seed(seed, kInitC));
  StyleProxyModel m;
  m.mapping_net = make_dense_net({latent_dim, kHidden, kHidden, latent_dim},
                                 {kLeaky, kLeaky, Act::identity}, map_rng);
  m.synthesis = make_dense_net({latent_dim, kHidden, kHidden, kImagePixels},
                               {kLeaky, kLeaky, Act::sigmoid}, syn_rng);
  m.w_recoder = make_dense_net({kImagePixels, kHidden, kHidden, latent_dim},
                               {kLeaky, kLeaky, Act::identity}, rec_rng);
  m.latent_dim = latent_dim;
  m.seed = seed;
  return m;
}

DenseNet make_recoder_net(std::size_t latent_dim, std::uint64_t seed) {
  RngState rng = make_rng(derive_seed(seed, kInitA));
  return make_dense_net({kImagePixels, kHidden, kHidden, latent_dim}, {kLeaky, kLeaky, Act::identity},
                        rng);
}

// ---------------------------------------------------------------------------
// Metadata.
// ---------------------------------------------------------------------------

std::string model_kind(const Model& m) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, VaeModel>) return "vae";
        else if constexpr (std::is_same_v<T, SvaeModel>) return "svae";
        else if constexpr (std::is_same_v<T, GanModel>) return "gan";
        else return "styleproxy";
      },
      m);
}

std::uint64_t model_seed(const Model& m) {
  return std::visit([](const auto& v) { return v.seed; }, m);
}

std::string model_id(const Model& m) { return model_kind(m) + ":" + std::to_string(model_seed(m)); }

std::size_t model_latent_dim(const Model& m) {
  return std::visit([](const auto& v) { return v.latent_dim; }, m);
}

// ---------------------------------------------------------------------------
// VAE / SVAE training. The two share one loop, differing only in the loss.
// ---------------------------------------------------------------------------

namespace {

template <typename ModelT, typename LossFn>
TrainLog vae_family_train(ModelT& model, const Dataset& dataset, const VaeTrainConfig& cfg,
                          LossFn&& loss_step) {
  auto t0 = Clock::now();
  if (dataset.size() == 0) throw std::invalid_argument("train: empty dataset");
  TrainLog log;
  log.seed = cfg.seed;
  log.columns = {"epoch", "total", "recon", "kl"};

  const std::size_t n = dataset.size();
  const std::size_t n_hold = holdout_count(n);
  const std::size_t n_train = n - n_hold;
  const std::size_t d = model.latent_dim;

  RngState shuffle_rng = make_rng(derive_seed(cfg.seed, kShuffle));
  RngState noise_rng = make_rng(derive_seed(cfg.seed, kNoise));

  auto enc_params = params_of(model.encoder);
  auto dec_params = params_of(model.decoder);
  std::vector<ParamRef> all_params = enc_params;
  all_params.insert(all_params.end(), dec_params.begin(), dec_params.end());
  OptState opt = make_adam(all_params, {cfg.lr, 0.9f, 0.999f, 1e-8f});

  NetView<float> enc_view = view_of(model.encoder);
  NetView<float> dec_view = view_of(model.decoder);
  VaeScratch<float> scratch;
  NetGrads<float> enc_g, dec_g;
  std::vector<float> batch_x, eps;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto perm = shuffled_indices(n_train, shuffle_rng);
    double sum_total = 0, sum_recon = 0, sum_kl = 0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < n_train; begin += cfg.batch) {
      std::size_t end = std::min(n_train, begin + cfg.batch);
      std::size_t m = end - begin;
      gather_rows(dataset.images, perm, begin, end, batch_x);
      eps.resize(m * d);
      rng_normal_fill(noise_rng, eps.data(), eps.size());
      VaeLossParts parts =
          loss_step(enc_view, dec_view, batch_x.data(), m, eps.data(), scratch, &enc_g, &dec_g);
      if (!std::isfinite(parts.total))
        throw TrainingDivergence("vae training diverged at epoch " + std::to_string(epoch));
      auto grads = grad_refs(enc_g);
      auto dec_grads = grad_refs(dec_g);
      grads.insert(grads.end(), dec_grads.begin(), dec_grads.end());
      adam_step(all_params, grads, opt);
      sum_total += parts.total * static_cast<double>(m);
      sum_recon += parts.recon * static_cast<double>(m);
      sum_kl += parts.kl * static_cast<double>(m);
      seen += m;
    }
    log.epochs.push_back({static_cast<double>(epoch), sum_total / seen, sum_recon / seen,
                          sum_kl / seen});
  }
  log.wall_seconds = seconds_since(t0);
  return log;
}

}  // namespace

std::pair<VaeModel, TrainLog> train_vae(const Dataset& dataset, const VaeTrainConfig& cfg) {
  VaeModel model = make_vae(cfg.latent_dim, cfg.gamma, cfg.seed);
  const float gamma = cfg.gamma;
  TrainLog log = vae_family_train(
      model, dataset, cfg,
      [gamma](const NetView<float>& enc, const NetView<float>& dec, const float* x, std::size_t m,
              const float* eps, VaeScratch<float>& s, NetGrads<float>* eg, NetGrads<float>* dg) {
        return vae_loss_grads(enc, dec, x, m, dec.input_dim(), gamma, eps, s, eg, dg);
      });
  const std::size_t n_hold = holdout_count(dataset.size());
  Tensor eval({n_hold > 0 ? n_hold : dataset.size(), kImageSide, kImageSide});
  std::copy_n(dataset.images.row(dataset.size() - eval.rows()), eval.numel(), eval.data.begin());
  log.held_out_mse = reconstruction_mse(Model{model}, eval);
  return {std::move(model), std::move(log)};
}

std::pair<SvaeModel, TrainLog> train_svae(const Dataset& dataset, const VaeTrainConfig& cfg) {
  SvaeModel model = make_svae(cfg.latent_dim, cfg.gamma, cfg.seed);
  const float gamma = cfg.gamma;
  TrainLog log = vae_family_train(
      model, dataset, cfg,
      [gamma](const NetView<float>& enc, const NetView<float>& dec, const float* x, std::size_t m,
              const float* eps, VaeScratch<float>& s, NetGrads<float>* eg, NetGrads<float>* dg) {
        return svae_loss_grads(enc, dec, x, m, dec.input_dim(), gamma, eps, s, eg, dg);
      });
  const std::size_t n_hold = holdout_count(dataset.size());
  Tensor eval({n_hold > 0 ? n_hold : dataset.size(), kImageSide, kImageSide});
  std::copy_n(dataset.images.row(dataset.size() - eval.rows()), eval.numel(), eval.data.begin());
  log.held_out_mse = reconstruction_mse(Model{model}, eval);
  return {std::move(model), std::move(log)};
}

// ---------------------------------------------------------------------------
// Adversarial training.
// ---------------------------------------------------------------------------

namespace {

// Shared by the plain GAN and the style proxy; the generator is a stack.
void adversarial_loop(std::vector<DenseNet*> gen_stack, DenseNet& disc, const Dataset& dataset,
                      std::size_t latent_dim, std::size_t epochs, float lr_g, float lr_d,
                      GanLoss kind, std::size_t batch, std::uint64_t seed, TrainLog& log) {
  auto t0 = Clock::now();
  if (dataset.size() == 0) throw std::invalid_argument("train: empty dataset");
  log.seed = seed;
  log.columns = {"epoch", "d_loss", "g_loss", "probe_pixel_var"};

  const std::size_t n = dataset.size();
  RngState shuffle_rng = make_rng(derive_seed(seed, kShuffle));
  RngState z_rng = make_rng(derive_seed(seed, kNoise));
  RngState probe_rng = make_rng(derive_seed(seed, kProbe));

  std::vector<ParamRef> g_params;
  for (DenseNet* net : gen_stack) {
    auto p = params_of(*net);
    g_params.insert(g_params.end(), p.begin(), p.end());
  }
  auto d_params = params_of(disc);
  OptState opt_g = make_adam(g_params, {lr_g, 0.5f, 0.999f, 1e-8f});
  OptState opt_d = make_adam(d_params, {lr_d, 0.5f, 0.999f, 1e-8f});

  std::vector<NetView<float>> gen_views;
  for (DenseNet* net : gen_stack) gen_views.push_back(view_of(*net));
  NetView<float> disc_view = view_of(disc);

  std::vector<FwdCache<float>> stack_caches;
  FwdCache<float> c_real, c_fake, c_disc;
  NetGrads<float> d_grads;
  std::vector<NetGrads<float>> g_grads;
  std::vector<float> real_x, z;

  int collapse_streak = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    auto perm = shuffled_indices(n, shuffle_rng);
    double sum_d = 0, sum_g = 0;
    std::size_t steps = 0;
    // Full batches only; a dataset smaller than one batch trains on all of it.
    const std::size_t n_batches = std::max<std::size_t>(1, n / batch);
    for (std::size_t bi = 0; bi < n_batches; ++bi) {
      std::size_t begin = bi * batch;
      std::size_t end = std::min(n, begin + batch);
      std::size_t m = end - begin;
      // Discriminator update on real rows vs a fresh fake batch.
      gather_rows(dataset.images, perm, begin, end, real_x);
      z.resize(m * latent_dim);
      rng_normal_fill(z_rng, z.data(), z.size());
      const float* gen_in = z.data();
      stack_caches.resize(gen_views.size());
      for (std::size_t si = 0; si < gen_views.size(); ++si)
        gen_in = net_forward(gen_views[si], gen_in, m, stack_caches[si]).data();
      double d_loss =
          gan_disc_loss_grads(disc_view, real_x.data(), gen_in, m, kind, c_real, c_fake, &d_grads);
      adam_step(d_params, grad_refs(d_grads), opt_d);
      // Generator update on a fresh draw.
      rng_normal_fill(z_rng, z.data(), z.size());
      double g_loss = gan_gen_loss_grads(gen_views, disc_view, z.data(), m, kind, stack_caches,
                                         c_disc, &g_grads);
      std::vector<GradRef> g_refs;
      for (const auto& ng : g_grads) {
        auto refs = grad_refs(ng);
        g_refs.insert(g_refs.end(), refs.begin(), refs.end());
      }
      adam_step(g_params, g_refs, opt_g);
      if (!std::isfinite(d_loss) || !std::isfinite(g_loss))
        throw TrainingDivergence("adversarial training diverged at epoch " + std::to_string(epoch));
      sum_d += d_loss;
      sum_g += g_loss;
      ++steps;
    }
    // Collapse detector: pixel variance of a fresh generated probe batch.
    const std::size_t probe_n = 128;
    z.resize(probe_n * latent_dim);
    rng_normal_fill(probe_rng, z.data(), z.size());
    const float* probe = z.data();
    stack_caches.resize(gen_views.size());
    for (std::size_t si = 0; si < gen_views.size(); ++si)
      probe = net_forward(gen_views[si], probe, probe_n, stack_caches[si]).data();
    const std::size_t probe_count = probe_n * kImagePixels;
    double sum = 0, sum_sq = 0;
    for (std::size_t i = 0; i < probe_count; ++i) {
      sum += probe[i];
      sum_sq += static_cast<double>(probe[i]) * probe[i];
    }
    double mean = sum / probe_count;
    double var = sum_sq / probe_count - mean * mean;
    collapse_streak = var < 1e-4 ? collapse_streak + 1 : 0;
    log.epochs.push_back({static_cast<double>(epoch), sum_d / steps, sum_g / steps, var});
    if (collapse_streak >= 5)
      throw TrainingDivergence("mode collapse: generated pixel variance " + std::to_string(var) +
                               " < 1e-4 for 5 consecutive epochs (epoch " + std::to_string(epoch) +
                               ")");
  }
  log.wall_seconds = seconds_since(t0);
}

}  // namespace

void gan_train_loop(GanModel& model, const Dataset& dataset, const GanTrainConfig& cfg,
                    TrainLog& log) {
  adversarial_loop({&model.generator}, model.discriminator, dataset, model.latent_dim, cfg.epochs,
                   cfg.lr_g, cfg.lr_d, cfg.loss, cfg.batch, cfg.seed, log);
}

std::pair<GanModel, TrainLog> train_gan(const Dataset& dataset, const GanTrainConfig& cfg) {
  GanModel model = make_gan(cfg.latent_dim, cfg.loss, cfg.seed);
  TrainLog log;
  gan_train_loop(model, dataset, cfg, log);
  return {std::move(model), std::move(log)};
}

std::pair<StyleProxyModel, TrainLog> train_style_proxy(const Dataset& dataset,
                                                       const StyleProxyTrainConfig& cfg) {
  StyleProxyModel model = make_style_proxy(cfg.latent_dim, cfg.seed);
  RngState disc_rng = make_rng(derive_seed(cfg.seed, kInitB + 100));
  DenseNet disc = make_dense_net({kImagePixels, kHidden, kHidden, 1}, {kLeaky, kLeaky, Act::identity},
                                 disc_rng);
  TrainLog log;
  adversarial_loop({&model.mapping_net, &model.synthesis}, disc, dataset, cfg.latent_dim, cfg.epochs,
                   cfg.lr_g, cfg.lr_d, GanLoss::least_squares, cfg.batch, cfg.seed, log);
  return {std::move(model), std::move(log)};
}

// ---------------------------------------------------------------------------
// Recoder training: fresh (code, image) pairs every step, so the fit is never
// constrained to dataset samples.
// ---------------------------------------------------------------------------

namespace {

TrainLog recoder_loop(DenseNet& recoder, const std::function<void(std::size_t, RngState&,
                                                                  std::vector<float>& codes,
                                                                  std::vector<float>& images)>& draw,
                      const RecoderTrainConfig& cfg) {
  auto t0 = Clock::now();
  TrainLog log;
  log.seed = cfg.seed;
  log.columns = {"step", "latent_mse"};
  auto params = params_of(recoder);
  OptState opt = make_adam(params, {cfg.lr, 0.9f, 0.999f, 1e-8f});
  NetView<float> view = view_of(recoder);
  RngState z_rng = make_rng(derive_seed(cfg.seed, kNoise));
  FwdCache<float> cache;
  NetGrads<float> grads;
  std::vector<float> codes, images;
  double window = 0.0;
  const std::size_t log_every = 50;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    draw(cfg.batch, z_rng, codes, images);
    double loss = regression_loss_grads(view, images.data(), codes.data(), cfg.batch, cache, &grads);
    if (!std::isfinite(loss))
      throw TrainingDivergence("recoder training diverged at step " + std::to_string(step));
    adam_step(params, grad_refs(grads), opt);
    window += loss;
    if ((step + 1) % log_every == 0 || step + 1 == cfg.steps) {
      std::size_t in_window = (step % log_every) + 1;
      log.epochs.push_back({static_cast<double>(step + 1), window / in_window});
      window = 0.0;
    }
  }
  log.wall_seconds = seconds_since(t0);
  return log;
}

}  // namespace

TrainLog train_recoder(GanModel& model, const RecoderTrainConfig& cfg) {
  if (!model.recoder) model.recoder = make_recoder_net(model.latent_dim, derive_seed(cfg.seed, kInitA));
  NetView<float> gen = view_of(model.generator);
  const std::size_t d = model.latent_dim;
  FwdCache<float> gen_cache;
  auto draw = [&](std::size_t m, RngState& rng, std::vector<float>& codes, std::vector<float>& images) {
    codes.resize(m * d);
    rng_normal_fill(rng, codes.data(), codes.size());
    const auto& x = net_forward(gen, codes.data(), m, gen_cache);
    images.assign(x.begin(), x.end());
  };
  return recoder_loop(*model.recoder, draw, cfg);
}

TrainLog train_recoder(StyleProxyModel& model, const RecoderTrainConfig& cfg) {
  NetView<float> mapping = view_of(model.mapping_net);
  NetView<float> synthesis = view_of(model.synthesis);
  const std::size_t d = model.latent_dim;
  FwdCache<float> map_cache, syn_cache;
  std::vector<float> z;
  auto draw = [&](std::size_t m, RngState& rng, std::vector<float>& codes, std::vector<float>& images) {
    z.resize(m * d);
    rng_normal_fill(rng, z.data(), z.size());
    const auto& w = net_forward(mapping, z.data(), m, map_cache);
    codes.assign(w.begin(), w.end());
    const auto& x = net_forward(synthesis, codes.data(), m, syn_cache);
    images.assign(x.begin(), x.end());
  };
  TrainLog log = recoder_loop(model.w_recoder, draw, cfg);
  model.recoder_trained = true;
  return log;
}

// ---------------------------------------------------------------------------
// Inference.
// ---------------------------------------------------------------------------

Tensor encode(const Model& m, const Tensor& images) {
  return std::visit(
      [&](const auto& v) -> Tensor {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, VaeModel> || std::is_same_v<T, SvaeModel>) {
          return posterior_mean(v.encoder, images, v.latent_dim);
        } else if constexpr (std::is_same_v<T, GanModel>) {
          if (!v.recoder)
            throw std::runtime_error("encode: GAN has no trained recoder; run train_recoder first");
          return run_net(*v.recoder, images_as_rows(images));
        } else {
          return run_net(v.w_recoder, images_as_rows(images));
        }
      },
      m);
}

Tensor decode(const Model& m, const Tensor& codes) {
  return std::visit(
      [&](const auto& v) -> Tensor {
        using T = std::decay_t<decltype(v)>;
        if (codes.rows() != 0 && codes.cols() != v.latent_dim)
          throw std::invalid_argument("decode: code width " + std::to_string(codes.cols()) +
                                      " does not match latent dim " + std::to_string(v.latent_dim));
        if constexpr (std::is_same_v<T, VaeModel>) {
          return to_images(run_net(v.decoder, codes));
        } else if constexpr (std::is_same_v<T, SvaeModel>) {
          return to_images(svae_decode_rows(v, codes));
        } else if constexpr (std::is_same_v<T, GanModel>) {
          return to_images(run_net(v.generator, codes));
        } else {
          return to_images(run_net(v.synthesis, codes));
        }
      },
      m);
}

Tensor sample_ancestral(const Model& m, RngState& rng, std::size_t n) {
  const std::size_t d = model_latent_dim(m);
  Tensor z({n, d});
  rng_normal_fill(rng, z.data.data(), z.numel());
  if (const auto* proxy = std::get_if<StyleProxyModel>(&m)) {
    Tensor w = run_net(proxy->mapping_net, z);
    return decode(m, w);
  }
  return decode(m, z);
}

double reconstruction_mse(const Model& m, const Tensor& images) {
  Tensor recon = decode(m, encode(m, images));
  return image_recon_mse(images, recon);
}

Tensor latent_traversal(const Model& m, const Tensor& z, std::size_t var_index, float lo, float hi,
                        std::size_t steps) {
  const std::size_t d = model_latent_dim(m);
  if (z.numel() != d) throw std::invalid_argument("latent_traversal: code width mismatch");
  if (var_index >= d) throw std::invalid_argument("latent_traversal: variable index out of range");
  if (steps < 1) throw std::invalid_argument("latent_traversal: steps must be >= 1");
  Tensor codes({steps, d});
  for (std::size_t s = 0; s < steps; ++s) {
    std::copy(z.data.begin(), z.data.end(), codes.row(s));
    float value = steps == 1 ? lo
                             : lo + (hi - lo) * static_cast<float>(s) / static_cast<float>(steps - 1);
    codes.row(s)[var_index] = value;
  }
  return decode(m, codes);
}

Tensor svae_combine(const Tensor& x1, const Tensor& x2, const Tensor& sigma) {
  if (!x1.same_shape(x2) || !x1.same_shape(sigma))
    throw std::invalid_argument("svae_combine: shape mismatch");
  Tensor out = x1;
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data[i] = sigma.data[i] * x1.data[i] + (1.0f - sigma.data[i]) * x2.data[i];
  return out;
}

double discriminator_accuracy(const GanModel& m, const Tensor& real_images, RngState& rng) {
  const std::size_t n = real_images.rows();
  if (n == 0) throw std::invalid_argument("discriminator_accuracy: empty batch");
  Tensor z({n, m.latent_dim});
  rng_normal_fill(rng, z.data.data(), z.numel());
  Tensor fake = run_net(m.generator, z);
  Tensor d_real = run_net(m.discriminator, images_as_rows(real_images));
  Tensor d_fake = run_net(m.discriminator, fake);
  const float threshold = m.loss == GanLoss::least_squares ? 0.5f : 0.0f;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d_real.data[i] > threshold) ++correct;
    if (d_fake.data[i] < threshold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(2 * n);
}

EncoderDecoder coder_of(const Model& m) {
  auto shared = std::make_shared<Model>(m);
  EncoderDecoder ed;
  ed.latent_dim = model_latent_dim(m);
  ed.encode_fn = [shared](const Tensor& images) { return encode(*shared, images); };
  ed.decode_fn = [shared](const Tensor& codes) { return decode(*shared, codes); };
  return ed;
}

DiffDecoder make_diff_decoder(const Model& m) {
  DiffDecoder dd;
  dd.latent_dim = model_latent_dim(m);
  dd.out_dim = kImagePixels;
  if (const auto* svae = std::get_if<SvaeModel>(&m)) {
    auto shadow = std::make_shared<ShadowNet>(widen(svae->decoder));
    dd.fwd = [shadow](const double* z, std::size_t n, std::vector<double>& x) {
      FwdCache<double> cache;
      const auto& logits = net_forward(view_of(*shadow), z, n, cache);
      x.resize(n * kImagePixels);
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = logits.data() + i * 3 * kImagePixels;
        for (std::size_t p = 0; p < kImagePixels; ++p) {
          double x1 = 1.0 / (1.0 + std::exp(-row[p]));
          double x2 = 1.0 / (1.0 + std::exp(-row[kImagePixels + p]));
          double sg = 1.0 / (1.0 + std::exp(-row[2 * kImagePixels + p]));
          x[i * kImagePixels + p] = sg * x1 + (1.0 - sg) * x2;
        }
      }
    };
    dd.vjp = [shadow](const double* z, std::size_t n, const double* dx, std::vector<double>& dz) {
      FwdCache<double> cache;
      const auto& logits = net_forward(view_of(*shadow), z, n, cache);
      std::vector<double> dlogits(n * 3 * kImagePixels);
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = logits.data() + i * 3 * kImagePixels;
        double* drow = dlogits.data() + i * 3 * kImagePixels;
        for (std::size_t p = 0; p < kImagePixels; ++p) {
          double x1 = 1.0 / (1.0 + std::exp(-row[p]));
          double x2 = 1.0 / (1.0 + std::exp(-row[kImagePixels + p]));
          double sg = 1.0 / (1.0 + std::exp(-row[2 * kImagePixels + p]));
          double g = dx[i * kImagePixels + p];
          drow[p] = g * sg * x1 * (1.0 - x1);
          drow[kImagePixels + p] = g * (1.0 - sg) * x2 * (1.0 - x2);
          drow[2 * kImagePixels + p] = g * (x1 - x2) * sg * (1.0 - sg);
        }
      }
      NetGrads<double> grads;
      net_backward(view_of(*shadow), cache, dlogits.data(), true, grads);
      dz = std::move(grads.dx);
    };
    return dd;
  }
  const DenseNet* net = nullptr;
  if (const auto* vae = std::get_if<VaeModel>(&m)) net = &vae->decoder;
  else if (const auto* gan = std::get_if<GanModel>(&m)) net = &gan->generator;
  else net = &std::get<StyleProxyModel>(m).synthesis;
  auto shadow = std::make_shared<ShadowNet>(widen(*net));
  dd.fwd = [shadow](const double* z, std::size_t n, std::vector<double>& x) {
    FwdCache<double> cache;
    x = net_forward(view_of(*shadow), z, n, cache);
  };
  dd.vjp = [shadow](const double* z, std::size_t n, const double* dx, std::vector<double>& dz) {
    FwdCache<double> cache;
    net_forward(view_of(*shadow), z, n, cache);
    NetGrads<double> grads;
    net_backward(view_of(*shadow), cache, dx, true, grads);
    dz = std::move(grads.dx);
  };
  return dd;
}

}  // namespace latent
