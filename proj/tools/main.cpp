// latent-atlas: train small generative models on a synthetic blob manifold,
// rank latent variables, build sector support sets, fit linear maps between
// latent spaces, and probe generative range by inversion.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "latent/errors.hpp"
#include "latent/gain.hpp"
#include "latent/invert.hpp"
#include "latent/io.hpp"
#include "latent/mapping.hpp"
#include "latent/parallel.hpp"
#include "latent/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace latent;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitDivergence = 3;

void emit_summary(json summary) {
  summary["status"] = "ok";
  std::cout << summary.dump(2) << std::endl;
}

Tensor load_images_arg(const std::string& data_dir) { return read_dataset(data_dir).images; }

struct ThreadsOption {
  unsigned threads = 0;
  void apply() const {
    unsigned n = threads;
    if (n == 0) {
      if (const char* env = std::getenv("LATENT_ATLAS_THREADS")) n = std::strtoul(env, nullptr, 10);
    }
    set_worker_threads(n == 0 ? 1 : n);
  }
};

void add_threads_flag(CLI::App* cmd, ThreadsOption& opt) {
  cmd->add_option("--threads", opt.threads,
                  "evaluation worker threads (default: LATENT_ATLAS_THREADS or 1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent-atlas: linear maps between latent spaces of small generative models"};
  app.require_subcommand(1);
  ThreadsOption threads;

  // --- gen-data -------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "generate the synthetic blob dataset");
  std::uint64_t gen_seed = 42;
  std::size_t gen_n = 8000;
  std::string gen_out = "dataset";
  gen->add_option("--seed", gen_seed, "dataset seed");
  gen->add_option("--n", gen_n, "number of images")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "output directory");
  add_threads_flag(gen, threads);

  // --- train ----------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train one model on a dataset");
  std::string train_kind = "vae", train_data = "dataset", train_out = "model.model";
  std::uint64_t train_seed = 1;
  std::optional<std::size_t> train_dim, train_epochs, train_batch, train_recoder_steps;
  std::optional<float> train_gamma, train_lr, train_lr_g, train_lr_d;
  std::string train_loss = "least-squares";
  train->add_option("--kind", train_kind, "vae | svae | gan | styleproxy")
      ->check(CLI::IsMember({"vae", "svae", "gan", "styleproxy"}));
  train->add_option("--data", train_data, "dataset directory");
  train->add_option("--seed", train_seed, "training seed");
  train->add_option("--out", train_out, "output model file");
  train->add_option("--latent-dim", train_dim, "latent dimension");
  train->add_option("--epochs", train_epochs, "training epochs");
  train->add_option("--batch", train_batch, "batch size");
  train->add_option("--gamma", train_gamma, "KL weight (vae/svae)");
  train->add_option("--lr", train_lr, "learning rate (vae/svae)");
  train->add_option("--lr-g", train_lr_g, "generator learning rate");
  train->add_option("--lr-d", train_lr_d, "discriminator learning rate");
  train->add_option("--gan-loss", train_loss, "least-squares | nonsaturating")
      ->check(CLI::IsMember({"least-squares", "nonsaturating"}));
  train->add_option("--recoder-steps", train_recoder_steps, "recoder training steps");
  add_threads_flag(train, threads);

  // --- encode ---------------------------------------------------------------
  auto* enc = app.add_subcommand("encode", "encode dataset images into latent codes");
  std::string enc_model = "model.model", enc_data = "dataset", enc_out = "codes.lsat";
  enc->add_option("--model", enc_model, "model file");
  enc->add_option("--data", enc_data, "dataset directory");
  enc->add_option("--out", enc_out, "output tensor file");
  add_threads_flag(enc, threads);

  // --- gain -----------------------------------------------------------------
  auto* gain_cmd = app.add_subcommand("gain", "rank latent variables by reconstruction gain");
  std::string gain_model = "model.model", gain_data = "dataset", gain_out = "gain.csv";
  gain_cmd->add_option("--model", gain_model, "model file");
  gain_cmd->add_option("--data", gain_data, "dataset directory");
  gain_cmd->add_option("--out", gain_out, "output CSV");
  add_threads_flag(gain_cmd, threads);

  // --- support-set ----------------------------------------------------------
  auto* sup = app.add_subcommand("support-set", "build the sector support set");
  std::string sup_model = "model.model", sup_data = "dataset", sup_out = "support.json";
  std::size_t sup_n = 5, sup_target = 32;
  float sup_th = 1.0f;
  bool sup_random = false;
  bool sup_euclidean = false;
  std::uint64_t sup_seed = 0;
  sup->add_option("--model", sup_model, "model file");
  sup->add_option("--data", sup_data, "dataset directory");
  sup->add_option("--n", sup_n, "number of selected variables")->check(CLI::PositiveNumber);
  sup->add_option("--th", sup_th, "sector threshold");
  sup->add_option("--target", sup_target, "support set size")->check(CLI::PositiveNumber);
  sup->add_flag("--random", sup_random, "pick sector members at random instead of most-extreme");
  sup->add_flag("--euclidean", sup_euclidean, "euclidean subspace threshold instead of per-coordinate");
  sup->add_option("--seed", sup_seed, "seed for --random picks");
  sup->add_option("--out", sup_out, "output JSON");
  add_threads_flag(sup, threads);

  // --- fit-map ----------------------------------------------------------------
  auto* fit = app.add_subcommand("fit-map", "fit a linear map between two latent spaces");
  std::string fit_src = "src.model", fit_dst = "dst.model", fit_data = "dataset", fit_out = "map.map";
  std::string fit_support_path;
  std::string fit_method = "closed-form";
  double fit_ridge = 1e-4;
  bool fit_bias = false;
  std::size_t fit_steps = 2000, fit_batch = 128;
  float fit_lr = 0.01f;
  fit->add_option("--src-model", fit_src, "source model file");
  fit->add_option("--dst-model", fit_dst, "destination model file");
  fit->add_option("--data", fit_data, "dataset directory");
  fit->add_option("--support", fit_support_path, "support set JSON (default: fit on all images)");
  fit->add_option("--method", fit_method, "closed-form | minibatch")
      ->check(CLI::IsMember({"closed-form", "minibatch"}));
  fit->add_option("--ridge", fit_ridge, "ridge strength");
  fit->add_flag("--bias", fit_bias, "fit an affine bias");
  fit->add_option("--steps", fit_steps, "minibatch steps");
  fit->add_option("--batch", fit_batch, "minibatch size");
  fit->add_option("--lr", fit_lr, "minibatch learning rate");
  fit->add_option("--out", fit_out, "output map file");
  add_threads_flag(fit, threads);

  // --- eval-map ---------------------------------------------------------------
  auto* ev = app.add_subcommand("eval-map", "evaluate a fitted map (L-MSE, R-MSE, M-MSE)");
  std::string ev_map = "map.map", ev_src = "src.model", ev_dst = "dst.model", ev_data = "dataset";
  std::string ev_out = "eval.json";
  std::size_t ev_n = 1000;
  ev->add_option("--map", ev_map, "map file");
  ev->add_option("--src-model", ev_src, "source model file");
  ev->add_option("--dst-model", ev_dst, "destination model file");
  ev->add_option("--data", ev_data, "dataset directory");
  ev->add_option("--n-images", ev_n, "evaluation images (taken from the end of the dataset)");
  ev->add_option("--out", ev_out, "output JSON");
  add_threads_flag(ev, threads);

  // --- matrix -----------------------------------------------------------------
  auto* mat = app.add_subcommand("matrix", "run the full study from a config file");
  std::string mat_config = "configs/demo.json", mat_out = "results";
  mat->add_option("--config", mat_config, "run config JSON");
  mat->add_option("--out", mat_out, "output directory");
  add_threads_flag(mat, threads);

  // --- traverse ---------------------------------------------------------------
  auto* trav = app.add_subcommand("traverse", "decode a sweep of one latent variable");
  std::string trav_model = "model.model", trav_out = "traverse.pgm";
  std::size_t trav_var = 0, trav_steps = 11;
  float trav_lo = -2.25f, trav_hi = 2.25f;
  std::uint64_t trav_seed = 0;
  bool trav_zero = false;
  trav->add_option("--model", trav_model, "model file");
  trav->add_option("--var", trav_var, "latent variable index");
  trav->add_option("--steps", trav_steps, "number of steps")->check(CLI::PositiveNumber);
  trav->add_option("--lo", trav_lo, "sweep start");
  trav->add_option("--hi", trav_hi, "sweep end");
  trav->add_option("--seed", trav_seed, "seed for the base code");
  trav->add_flag("--zero", trav_zero, "use the zero base code instead of a sampled one");
  trav->add_option("--out", trav_out, "output PGM strip");
  add_threads_flag(trav, threads);

  // --- sample -----------------------------------------------------------------
  auto* samp = app.add_subcommand("sample", "ancestral samples from a trained model");
  std::string samp_model = "model.model", samp_out = "samples.pgm";
  std::size_t samp_n = 16;
  std::uint64_t samp_seed = 0;
  samp->add_option("--model", samp_model, "model file");
  samp->add_option("--n", samp_n, "number of samples")->check(CLI::PositiveNumber);
  samp->add_option("--seed", samp_seed, "sampling seed");
  samp->add_option("--out", samp_out, "output PGM grid");
  add_threads_flag(samp, threads);

  // --- invert -----------------------------------------------------------------
  auto* inv = app.add_subcommand("invert", "recover the latent code of a dataset image");
  std::string inv_model = "model.model", inv_data = "dataset", inv_out = "invert";
  std::size_t inv_index = 0, inv_steps = 500;
  double inv_lr = 1.0, inv_prior = 0.0;
  std::string inv_method = "gradient";
  inv->add_option("--model", inv_model, "model file");
  inv->add_option("--data", inv_data, "dataset directory");
  inv->add_option("--index", inv_index, "dataset image index");
  inv->add_option("--method", inv_method, "recoder | gradient | recoder+gradient")
      ->check(CLI::IsMember({"recoder", "gradient", "recoder+gradient"}));
  inv->add_option("--steps", inv_steps, "gradient steps");
  inv->add_option("--lr", inv_lr, "initial step size");
  inv->add_option("--prior", inv_prior, "optional |z|^2 penalty weight");
  inv->add_option("--out", inv_out, "output prefix (.json report, .pgm strip)");
  add_threads_flag(inv, threads);

  // --- probe ------------------------------------------------------------------
  auto* probe = app.add_subcommand("probe", "generative-range probe: invert in/out-of-range images");
  std::string probe_model = "model.model", probe_data = "dataset", probe_out = "probe.json";
  std::size_t probe_k = 16, probe_steps = 300;
  std::string probe_method = "gradient";
  std::uint64_t probe_seed = 7;
  probe->add_option("--model", probe_model, "model file");
  probe->add_option("--data", probe_data, "dataset directory");
  probe->add_option("--k", probe_k, "probe set size")->check(CLI::PositiveNumber);
  probe->add_option("--steps", probe_steps, "gradient steps");
  probe->add_option("--method", probe_method, "recoder | gradient | recoder+gradient")
      ->check(CLI::IsMember({"recoder", "gradient", "recoder+gradient"}));
  probe->add_option("--seed", probe_seed, "seed for the in-range generated set");
  probe->add_option("--out", probe_out, "output JSON");
  add_threads_flag(probe, threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    threads.apply();

    if (gen->parsed()) {
      Dataset ds = make_dataset(gen_seed, gen_n);
      write_dataset(gen_out, ds);
      emit_summary({{"command", "gen-data"},
                    {"seed", gen_seed},
                    {"n", gen_n},
                    {"out", gen_out},
                    {"images_checksum", fnv1a_bits(ds.images)}});
    } else if (train->parsed()) {
      Dataset ds = read_dataset(train_data);
      ModelSpec spec = default_model_spec(train_kind);
      if (train_dim) spec.latent_dim = *train_dim;
      if (train_epochs) spec.epochs = *train_epochs;
      if (train_batch) spec.batch = *train_batch;
      if (train_gamma) spec.gamma = *train_gamma;
      if (train_lr) spec.lr = *train_lr;
      if (train_lr_g) spec.lr_g = *train_lr_g;
      if (train_lr_d) spec.lr_d = *train_lr_d;
      if (train_recoder_steps) spec.recoder_steps = *train_recoder_steps;
      spec.loss = train_loss == "nonsaturating" ? GanLoss::nonsaturating : GanLoss::least_squares;
      TrainLog log;
      Model model = train_from_spec(ds, spec, train_seed, log);
      save_model(train_out, model);
      const std::string log_path = train_out + "-train.csv";
      write_train_log_csv(log_path, log);
      emit_summary({{"command", "train"},
                    {"kind", train_kind},
                    {"seed", train_seed},
                    {"out", train_out},
                    {"train_log", log_path},
                    {"held_out_mse", log.held_out_mse},
                    {"wall_seconds", log.wall_seconds}});
    } else if (enc->parsed()) {
      Model model = load_model(enc_model);
      Tensor codes = encode(model, load_images_arg(enc_data));
      write_tensor(enc_out, codes);
      emit_summary({{"command", "encode"},
                    {"model", model_id(model)},
                    {"n", codes.rows()},
                    {"latent_dim", codes.cols()},
                    {"out", enc_out}});
    } else if (gain_cmd->parsed()) {
      Model model = load_model(gain_model);
      GainReport report = rank_variables(model, load_images_arg(gain_data));
      write_gain_csv(gain_out, report);
      emit_summary({{"command", "gain"},
                    {"model", model_id(model)},
                    {"out", gain_out},
                    {"top_variable", report.order.front()},
                    {"top_gain", report.gains[report.order.front()]}});
    } else if (sup->parsed()) {
      Model model = load_model(sup_model);
      Dataset ds = read_dataset(sup_data);
      GainReport report = rank_variables(model, ds.images);
      SupportSetParams params;
      params.n_features = sup_n;
      params.threshold = sup_th;
      params.target_size = sup_target;
      params.norm = sup_euclidean ? SectorNorm::euclidean : SectorNorm::per_coordinate;
      params.pick = sup_random ? PickMode::random : PickMode::extreme;
      params.pick_seed = sup_seed;
      SupportSet set = build_support_set(encode(model, ds.images), report, params);
      write_support_set(sup_out, set);
      double diversity = diversity_score(ds.images, set.indices());
      emit_summary({{"command", "support-set"},
                    {"out", sup_out},
                    {"size", set.entries.size()},
                    {"sectors", std::size_t{1} << sup_n},
                    {"selected_vars", set.selected},
                    {"diversity", diversity}});
    } else if (fit->parsed()) {
      Model src = load_model(fit_src);
      Model dst = load_model(fit_dst);
      Dataset ds = read_dataset(fit_data);
      Tensor fit_images = ds.images;
      std::string fit_data_tag = "full-data";
      if (!fit_support_path.empty()) {
        SupportSet set = read_support_set(fit_support_path);
        auto idx = set.indices();
        Tensor subset({idx.size(), kImageSide, kImageSide});
        for (std::size_t i = 0; i < idx.size(); ++i)
          std::copy_n(ds.images.row(idx[i]), kImagePixels, subset.row(i));
        fit_images = std::move(subset);
        fit_data_tag = "support:" + fit_support_path;
      }
      Tensor z1 = encode(src, fit_images);
      Tensor z2 = encode(dst, fit_images);
      LinearMap map;
      if (fit_method == "closed-form") {
        map = fit_linear_map(z1, z2, {fit_bias, fit_ridge});
      } else {
        // Minibatch route: seeded resampling of the fixed encoded rows.
        RngState rng = make_rng(derive_seed(ds.seed, 0xf17));
        auto sampler = [&](std::size_t batch, Tensor& b1, Tensor& b2) {
          b1 = Tensor({batch, z1.cols()});
          b2 = Tensor({batch, z2.cols()});
          for (std::size_t i = 0; i < batch; ++i) {
            std::size_t row = static_cast<std::size_t>(rng_next_u64(rng) % z1.rows());
            std::copy_n(z1.row(row), z1.cols(), b1.row(i));
            std::copy_n(z2.row(row), z2.cols(), b2.row(i));
          }
        };
        MinibatchOptions opts;
        opts.steps = fit_steps;
        opts.batch = fit_batch;
        opts.lr = fit_lr;
        opts.bias = fit_bias;
        map = fit_linear_map_minibatch(sampler, z1.cols(), z2.cols(), opts).map;
      }
      map.src_model_id = model_id(src);
      map.dst_model_id = model_id(dst);
      map.meta.fit_data = fit_data_tag;
      save_linear_map(fit_out, map);
      emit_summary({{"command", "fit-map"},
                    {"from", map.src_model_id},
                    {"to", map.dst_model_id},
                    {"method", map.meta.method},
                    {"fit_data", fit_data_tag},
                    {"n_fit", fit_images.rows()},
                    {"l_mse_fit", map_l_mse(map, z1, z2)},
                    {"out", fit_out}});
    } else if (ev->parsed()) {
      Model src = load_model(ev_src);
      Model dst = load_model(ev_dst);
      LinearMap map = load_linear_map(ev_map);
      Dataset ds = read_dataset(ev_data);
      std::size_t n = std::min(ev_n, ds.size());
      Tensor images({n, kImageSide, kImageSide});
      std::copy_n(ds.images.row(ds.size() - n), n * kImagePixels, images.data.data());
      EvalReport report = evaluate_mapping(src, dst, map, images);
      json doc = {{"from", model_id(src)},   {"to", model_id(dst)},
                  {"l_mse", report.l_mse},   {"l_mse_raw", report.l_mse_raw},
                  {"r_mse", report.r_mse},   {"m_mse", report.m_mse},
                  {"n_eval", report.n_eval}};
      std::ofstream out(ev_out);
      if (!out) throw IoError(IoCode::truncated, "cannot write " + ev_out);
      out << doc.dump(2) << "\n";
      doc["command"] = "eval-map";
      doc["out"] = ev_out;
      emit_summary(doc);
    } else if (mat->parsed()) {
      RunConfig cfg = load_run_config(mat_config);
      json summary = run_matrix_pipeline(cfg, mat_out, std::cerr);
      summary["command"] = "matrix";
      summary["config"] = mat_config;
      emit_summary(summary);
    } else if (trav->parsed()) {
      Model model = load_model(trav_model);
      Tensor z({model_latent_dim(model)});
      if (!trav_zero) {
        RngState rng = make_rng(trav_seed);
        rng_normal_fill(rng, z.data.data(), z.numel());
      }
      Tensor strip = latent_traversal(model, z, trav_var, trav_lo, trav_hi, trav_steps);
      write_image_pgm(trav_out, image_strip(strip));
      emit_summary({{"command", "traverse"},
                    {"model", model_id(model)},
                    {"var", trav_var},
                    {"steps", trav_steps},
                    {"range", {trav_lo, trav_hi}},
                    {"out", trav_out}});
    } else if (samp->parsed()) {
      Model model = load_model(samp_model);
      RngState rng = make_rng(samp_seed);
      Tensor samples = sample_ancestral(model, rng, samp_n);
      write_image_pgm(samp_out, image_grid(samples, 8));
      emit_summary({{"command", "sample"},
                    {"model", model_id(model)},
                    {"n", samp_n},
                    {"seed", samp_seed},
                    {"mean_pixel", mean_pixel_value(samples)},
                    {"out", samp_out}});
    } else if (inv->parsed()) {
      Model model = load_model(inv_model);
      Dataset ds = read_dataset(inv_data);
      if (inv_index >= ds.size()) throw std::invalid_argument("--index exceeds dataset size");
      Tensor target({1, kImageSide, kImageSide});
      std::copy_n(ds.images.row(inv_index), kImagePixels, target.data.data());
      InvertConfig cfg;
      cfg.steps = inv_steps;
      cfg.lr = inv_lr;
      cfg.prior_weight = inv_prior;
      auto results = invert_images(model, target, inversion_method_from_name(inv_method), cfg);
      const InversionResult& r = results.front();
      Tensor code_row({1, r.code.numel()});
      code_row.data = r.code.data;
      Tensor recon = decode(model, code_row);
      Tensor sheet({2, kImageSide, kImageSide});
      std::copy_n(target.data.data(), kImagePixels, sheet.data.data());
      std::copy_n(recon.data.data(), kImagePixels, sheet.data.data() + kImagePixels);
      write_image_pgm(inv_out + ".pgm", image_strip(sheet));
      json doc = {{"command", "invert"},
                  {"model", model_id(model)},
                  {"index", inv_index},
                  {"method", inversion_method_name(r.method)},
                  {"final_image_mse", r.final_image_mse},
                  {"steps_used", r.steps_used},
                  {"out", inv_out + ".pgm"}};
      std::ofstream out(inv_out + ".json");
      if (!out) throw IoError(IoCode::truncated, "cannot write " + inv_out + ".json");
      out << doc.dump(2) << "\n";
      emit_summary(doc);
    } else if (probe->parsed()) {
      Model model = load_model(probe_model);
      Dataset ds = read_dataset(probe_data);
      RngState rng = make_rng(probe_seed);
      Tensor in_range = sample_ancestral(model, rng, probe_k);
      Tensor out_range = out_of_range_probe_set(ds, probe_k);
      InvertConfig cfg;
      cfg.steps = probe_steps;
      RangeProbeReport report =
          range_probe(model, in_range, out_range, inversion_method_from_name(probe_method), cfg);
      json doc = {{"command", "probe"},
                  {"model", model_id(model)},
                  {"method", inversion_method_name(report.method)},
                  {"median_in", report.median_in},
                  {"median_out", report.median_out},
                  {"ratio", report.ratio},
                  {"out", probe_out}};
      std::ofstream out(probe_out);
      if (!out) throw IoError(IoCode::truncated, "cannot write " + probe_out);
      out << doc.dump(2) << "\n";
      emit_summary(doc);
    }
  } catch (const TrainingDivergence& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
