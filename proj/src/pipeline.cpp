#include "latent/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "latent/errors.hpp"
#include "latent/gain.hpp"
#include "latent/io.hpp"
#include "latent/mapping.hpp"

namespace latent {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& path) {
  if (!obj.is_object()) throw std::invalid_argument("config: " + path + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key \"" + path + key + "\"");
  }
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) throw std::invalid_argument("config: missing key \"" + path + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: key \"" + path + key + "\" has the wrong type");
  }
}

template <typename T>
T optional_of(const json& obj, const std::string& key, const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: key \"" + path + key + "\" has the wrong type");
  }
}

}  // namespace

ModelSpec default_model_spec(const std::string& kind) {
  ModelSpec spec;
  spec.kind = kind;
  if (kind == "vae") {
    spec.latent_dim = 16;
  } else if (kind == "svae") {
    spec.latent_dim = 24;
  } else if (kind == "gan") {
    spec.latent_dim = 16;
  } else if (kind == "styleproxy") {
    spec.latent_dim = 32;
  } else {
    throw std::invalid_argument("unknown model kind: " + kind);
  }
  return spec;
}

RunConfig parse_run_config(const json& doc) {
  reject_unknown_keys(doc, {"dataset", "models", "support", "mapping", "eval"}, "");
  RunConfig cfg;

  const json& dataset = doc.at("dataset");
  reject_unknown_keys(dataset, {"seed", "n"}, "dataset.");
  cfg.dataset_seed = require<std::uint64_t>(dataset, "seed", "dataset.");
  cfg.dataset_n = require<std::size_t>(dataset, "n", "dataset.");
  if (cfg.dataset_n < 1) throw std::invalid_argument("config: dataset.n must be >= 1");

  if (!doc.contains("models") || !doc.at("models").is_array() || doc.at("models").empty())
    throw std::invalid_argument("config: models must be a non-empty array");
  for (const auto& entry : doc.at("models")) {
    reject_unknown_keys(entry, {"kind", "latent_dim", "seeds", "hyperparams"}, "models[].");
    ModelSpec spec = default_model_spec(require<std::string>(entry, "kind", "models[]."));
    spec.latent_dim = optional_of<std::size_t>(entry, "latent_dim", "models[].", spec.latent_dim);
    spec.seeds = require<std::vector<std::uint64_t>>(entry, "seeds", "models[].");
    if (spec.seeds.empty()) throw std::invalid_argument("config: models[].seeds must be non-empty");
    if (entry.contains("hyperparams")) {
      const json& hp = entry.at("hyperparams");
      const std::string path = "models[].hyperparams.";
      if (spec.kind == "vae" || spec.kind == "svae") {
        reject_unknown_keys(hp, {"gamma", "epochs", "lr", "batch"}, path);
        spec.gamma = optional_of<float>(hp, "gamma", path, spec.gamma);
        spec.lr = optional_of<float>(hp, "lr", path, spec.lr);
      } else {
        reject_unknown_keys(hp, {"epochs", "lr_g", "lr_d", "loss", "batch", "recoder_steps", "recoder_lr"},
                            path);
        spec.lr_g = optional_of<float>(hp, "lr_g", path, spec.lr_g);
        spec.lr_d = optional_of<float>(hp, "lr_d", path, spec.lr_d);
        spec.recoder_steps = optional_of<std::size_t>(hp, "recoder_steps", path, spec.recoder_steps);
        spec.recoder_lr = optional_of<float>(hp, "recoder_lr", path, spec.recoder_lr);
        if (hp.contains("loss")) {
          std::string name = hp.at("loss").get<std::string>();
          if (name == "least-squares") spec.loss = GanLoss::least_squares;
          else if (name == "nonsaturating") spec.loss = GanLoss::nonsaturating;
          else throw std::invalid_argument("config: unknown gan loss \"" + name + "\"");
        }
      }
      spec.epochs = optional_of<std::size_t>(hp, "epochs", path, spec.epochs);
      spec.batch = optional_of<std::size_t>(hp, "batch", path, spec.batch);
    }
    cfg.models.push_back(std::move(spec));
  }

  const json& support = doc.at("support");
  reject_unknown_keys(support, {"n_features", "threshold", "target_size", "mode", "seed"}, "support.");
  cfg.support.n_features = require<std::size_t>(support, "n_features", "support.");
  cfg.support.threshold = require<float>(support, "threshold", "support.");
  cfg.support.target_size = require<std::size_t>(support, "target_size", "support.");
  std::string mode = optional_of<std::string>(support, "mode", "support.", "extreme");
  if (mode == "extreme") cfg.support.pick = PickMode::extreme;
  else if (mode == "random") cfg.support.pick = PickMode::random;
  else throw std::invalid_argument("config: support.mode must be \"extreme\" or \"random\"");
  cfg.support.pick_seed = optional_of<std::uint64_t>(support, "seed", "support.", 0);

  const json& mapping = doc.at("mapping");
  reject_unknown_keys(mapping, {"bias", "ridge", "method", "fit_on"}, "mapping.");
  cfg.mapping.bias = optional_of<bool>(mapping, "bias", "mapping.", false);
  cfg.mapping.ridge = optional_of<double>(mapping, "ridge", "mapping.", 1e-4);
  cfg.map_method = optional_of<std::string>(mapping, "method", "mapping.", "closed-form");
  if (cfg.map_method != "closed-form" && cfg.map_method != "minibatch")
    throw std::invalid_argument("config: mapping.method must be \"closed-form\" or \"minibatch\"");
  std::string fit_on = optional_of<std::string>(mapping, "fit_on", "mapping.", "support");
  if (fit_on == "support") cfg.fit_on_support = true;
  else if (fit_on == "full") cfg.fit_on_support = false;
  else throw std::invalid_argument("config: mapping.fit_on must be \"support\" or \"full\"");

  const json& eval = doc.at("eval");
  reject_unknown_keys(eval, {"n_images"}, "eval.");
  cfg.eval_images = require<std::size_t>(eval, "n_images", "eval.");
  if (cfg.eval_images < 1) throw std::invalid_argument("config: eval.n_images must be >= 1");
  if (cfg.eval_images > cfg.dataset_n)
    throw std::invalid_argument("config: eval.n_images exceeds dataset.n");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoCode::truncated, "cannot open config: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(doc);
}

Model train_from_spec(const Dataset& dataset, const ModelSpec& spec, std::uint64_t seed,
                      TrainLog& log) {
  if (spec.kind == "vae" || spec.kind == "svae") {
    VaeTrainConfig cfg;
    cfg.latent_dim = spec.latent_dim;
    cfg.gamma = spec.gamma;
    cfg.epochs = spec.epochs;
    cfg.lr = spec.lr;
    cfg.batch = spec.batch;
    cfg.seed = seed;
    if (spec.kind == "vae") {
      auto [model, l] = train_vae(dataset, cfg);
      log = std::move(l);
      return model;
    }
    auto [model, l] = train_svae(dataset, cfg);
    log = std::move(l);
    return model;
  }
  if (spec.kind == "gan") {
    GanTrainConfig cfg;
    cfg.latent_dim = spec.latent_dim;
    cfg.epochs = spec.epochs;
    cfg.lr_g = spec.lr_g;
    cfg.lr_d = spec.lr_d;
    cfg.loss = spec.loss;
    cfg.batch = spec.batch;
    cfg.seed = seed;
    auto [model, l] = train_gan(dataset, cfg);
    log = std::move(l);
    RecoderTrainConfig rc;
    rc.steps = spec.recoder_steps;
    rc.lr = spec.recoder_lr;
    rc.batch = spec.batch;
    rc.seed = derive_seed(seed, 0x2ec0de2);
    train_recoder(model, rc);
    return model;
  }
  if (spec.kind == "styleproxy") {
    StyleProxyTrainConfig cfg;
    cfg.latent_dim = spec.latent_dim;
    cfg.epochs = spec.epochs;
    cfg.lr_g = spec.lr_g;
    cfg.lr_d = spec.lr_d;
    cfg.batch = spec.batch;
    cfg.seed = seed;
    auto [model, l] = train_style_proxy(dataset, cfg);
    log = std::move(l);
    RecoderTrainConfig rc;
    rc.steps = spec.recoder_steps;
    rc.lr = spec.recoder_lr;
    rc.batch = spec.batch;
    rc.seed = derive_seed(seed, 0x2ec0de2);
    train_recoder(model, rc);
    return model;
  }
  throw std::invalid_argument("unknown model kind: " + spec.kind);
}

namespace {

Tensor rows_subset(const Tensor& images, std::size_t begin, std::size_t count) {
  Tensor out({count, kImageSide, kImageSide});
  std::copy_n(images.row(begin), count * kImagePixels, out.data.data());
  return out;
}

Tensor gather_images(const Tensor& images, const std::vector<std::size_t>& idx) {
  Tensor out({idx.size(), kImageSide, kImageSide});
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(images.row(idx[i]), kImagePixels, out.row(i));
  return out;
}

std::string sanitize(std::string id) {
  for (char& c : id)
    if (c == ':') c = '-';
  return id;
}

}  // namespace

json run_matrix_pipeline(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  fs::create_directories(out_dir);
  fs::create_directories(out_dir + "/models");
  fs::create_directories(out_dir + "/maps");
  fs::create_directories(out_dir + "/reports");
  fs::create_directories(out_dir + "/figures");

  json summary;
  summary["out_dir"] = out_dir;
  json artifacts = json::array();
  auto note = [&](const std::string& path) { artifacts.push_back(path); };

  log << "[pipeline] dataset seed=" << cfg.dataset_seed << " n=" << cfg.dataset_n << "\n";
  Dataset dataset = make_dataset(cfg.dataset_seed, cfg.dataset_n);
  write_dataset(out_dir + "/dataset", dataset);
  note(out_dir + "/dataset");

  // Model zoo.
  std::vector<Model> zoo;
  std::vector<std::string> ids;
  json model_info = json::array();
  for (const auto& spec : cfg.models) {
    for (std::uint64_t seed : spec.seeds) {
      log << "[pipeline] training " << spec.kind << " seed=" << seed << " ..." << std::flush;
      TrainLog train_log;
      Model model = train_from_spec(dataset, spec, seed, train_log);
      const std::string id = model_id(model);
      const std::string base = out_dir + "/models/" + sanitize(id);
      save_model(base + ".model", model);
      write_train_log_csv(base + "-train.csv", train_log);
      note(base + ".model");
      log << " done (" << train_log.wall_seconds << "s, held-out mse=" << train_log.held_out_mse
          << ")\n";
      json info = {{"id", id}, {"kind", spec.kind}, {"seed", seed},
                   {"held_out_mse", train_log.held_out_mse}};
      model_info.push_back(info);
      zoo.push_back(std::move(model));
      ids.push_back(id);
    }
  }
  summary["models"] = model_info;

  // Feature ranking and support set, built from the first model's encodings.
  const Model& anchor = zoo.front();
  log << "[pipeline] ranking latent variables of " << ids.front() << "\n";
  GainReport gains = rank_variables(anchor, dataset.images);
  write_gain_csv(out_dir + "/reports/gain.csv", gains);
  note(out_dir + "/reports/gain.csv");

  Tensor encodings = encode(anchor, dataset.images);
  SupportSet support = build_support_set(encodings, gains, cfg.support);
  write_support_set(out_dir + "/support.json", support);
  note(out_dir + "/support.json");
  {
    auto idx = support.indices();
    Tensor sheet = image_grid(gather_images(dataset.images, idx), 8);
    write_image_pgm(out_dir + "/figures/support.pgm", sheet);
  }
  double support_diversity = diversity_score(dataset.images, support.indices());
  double baseline_diversity = mean_pairwise_mse(dataset.images, 200);
  summary["support"] = {{"size", support.entries.size()},
                        {"selected_vars", support.selected},
                        {"diversity", support_diversity},
                        {"dataset_diversity_baseline", baseline_diversity}};
  log << "[pipeline] support set: " << support.entries.size() << " images, diversity "
      << support_diversity << " vs baseline " << baseline_diversity << "\n";

  // Pairwise maps.
  Tensor eval_images = rows_subset(dataset.images, dataset.size() - cfg.eval_images, cfg.eval_images);
  std::vector<ModelEntry> entries;
  for (std::size_t i = 0; i < zoo.size(); ++i)
    entries.push_back({ids[i], model_kind(zoo[i]), &zoo[i]});
  std::optional<SupportSet> fit_support;
  if (cfg.fit_on_support) fit_support = support;
  log << "[pipeline] fitting " << entries.size() * entries.size() << " maps ("
      << (cfg.fit_on_support ? "support" : "full-data") << " fit)\n";
  MatrixReport matrix =
      run_type_matrix(entries, dataset.images, fit_support, eval_images, cfg.mapping);
  write_matrix_csv(out_dir + "/reports/table.csv", matrix);
  write_matrix_json(out_dir + "/reports/matrix.json", matrix);
  note(out_dir + "/reports/table.csv");
  note(out_dir + "/reports/matrix.json");
  for (const auto& pair : matrix.pairs) {
    if (pair.from_id == pair.to_id) continue;
    const std::string base =
        out_dir + "/maps/" + sanitize(pair.from_id) + "__" + sanitize(pair.to_id);
    save_linear_map(base + ".map", pair.map);
    write_eval_report_json(out_dir + "/reports/" + sanitize(pair.from_id) + "__" +
                               sanitize(pair.to_id) + ".json",
                           pair);
  }

  // Figure sheets: traversals of the top variables, ancestral samples, and
  // one relocation sheet per relocation type.
  {
    Tensor z0({model_latent_dim(anchor)});
    for (std::size_t k = 0; k < std::min<std::size_t>(3, gains.order.size()); ++k) {
      Tensor strip = latent_traversal(anchor, z0, gains.order[k]);
      write_image_pgm(out_dir + "/figures/traverse-var" + std::to_string(gains.order[k]) + ".pgm",
                      image_strip(strip));
    }
    for (std::size_t i = 0; i < zoo.size(); ++i) {
      RngState rng = make_rng(derive_seed(cfg.dataset_seed, 0xA11 + i));
      Tensor samples = sample_ancestral(zoo[i], rng, 16);
      write_image_pgm(out_dir + "/figures/samples-" + sanitize(ids[i]) + ".pgm",
                      image_grid(samples, 8));
    }
    std::set<int> sheet_done;
    const std::size_t n_show = std::min<std::size_t>(8, eval_images.rows());
    Tensor show = rows_subset(eval_images, 0, n_show);
    for (const auto& pair : matrix.pairs) {
      if (pair.type == 0 || sheet_done.count(pair.type)) continue;
      sheet_done.insert(pair.type);
      const Model* src = nullptr;
      const Model* dst = nullptr;
      for (std::size_t i = 0; i < zoo.size(); ++i) {
        if (ids[i] == pair.from_id) src = &zoo[i];
        if (ids[i] == pair.to_id) dst = &zoo[i];
      }
      Tensor z1 = encode(*src, show);
      Tensor recon = decode(*src, z1);
      Tensor mapped = decode(*dst, apply_map(pair.map, z1));
      Tensor sheet({3 * n_show, kImageSide, kImageSide});
      std::copy_n(show.data.data(), n_show * kImagePixels, sheet.data.data());
      std::copy_n(recon.data.data(), n_show * kImagePixels, sheet.data.data() + n_show * kImagePixels);
      std::copy_n(mapped.data.data(), n_show * kImagePixels,
                  sheet.data.data() + 2 * n_show * kImagePixels);
      write_image_pgm(out_dir + "/figures/relocation-type" + std::to_string(pair.type) + ".pgm",
                      image_grid(sheet, n_show));
    }
  }

  json rows = json::array();
  for (const auto& row : matrix.rows) {
    rows.push_back({{"from", row.from_kind},
                    {"to", row.to_kind},
                    {"type", row.type},
                    {"l_mse", row.l_mean},
                    {"r_mse", row.r_mean},
                    {"m_mse", row.m_mean},
                    {"pairs", row.pairs}});
  }
  summary["matrix"] = rows;
  summary["artifacts"] = artifacts;

  std::ofstream sum_out(out_dir + "/summary.json");
  sum_out << summary.dump(2) << "\n";
  log << "[pipeline] finished in " << elapsed() << "s\n";
  return summary;
}

}  // namespace latent
