#include "latent/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "latent/errors.hpp"
#include "latent/linalg.hpp"
#include "latent/optim.hpp"
#include "latent/parallel.hpp"

namespace latent {

namespace {

Tensor column_means(const Tensor& z) {
  Tensor mu({z.cols()});
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) acc += z.at(i, j);
    mu.data[j] = static_cast<float>(acc / static_cast<double>(z.rows()));
  }
  return mu;
}

Tensor centered(const Tensor& z, const Tensor& mu) {
  Tensor out = z;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) out.at(i, j) -= mu.data[j];
  return out;
}

}  // namespace

LinearMap fit_linear_map(const Tensor& z1, const Tensor& z2, const MapFitOptions& opts) {
  if (z1.rows() != z2.rows())
    throw std::invalid_argument("fit_linear_map: row count mismatch (" + std::to_string(z1.rows()) +
                                " vs " + std::to_string(z2.rows()) + ")");
  if (z1.rows() == 0) throw std::invalid_argument("fit_linear_map: no rows");
  const double m = static_cast<double>(z1.rows());
  // The objective is a per-row mean; the sum-form solver gets ridge * m.
  LinearMap map;
  map.meta.ridge = opts.ridge;
  map.meta.n_fit = z1.rows();
  if (!opts.bias) {
    Tensor X = solve_least_squares(z1, z2, opts.ridge * m);  // src x dst
    map.A = Tensor({z2.cols(), z1.cols()});
    for (std::size_t r = 0; r < map.A.rows(); ++r)
      for (std::size_t c = 0; c < map.A.cols(); ++c) map.A.at(r, c) = X.at(c, r);
    return map;
  }
  // Unpenalized bias: fit on centered data, then b = mu2 - A mu1.
  Tensor mu1 = column_means(z1), mu2 = column_means(z2);
  Tensor X = solve_least_squares(centered(z1, mu1), centered(z2, mu2), opts.ridge * m);
  map.A = Tensor({z2.cols(), z1.cols()});
  for (std::size_t r = 0; r < map.A.rows(); ++r)
    for (std::size_t c = 0; c < map.A.cols(); ++c) map.A.at(r, c) = X.at(c, r);
  Tensor b({z2.cols()});
  for (std::size_t r = 0; r < b.numel(); ++r) {
    double acc = mu2.data[r];
    for (std::size_t c = 0; c < z1.cols(); ++c)
      acc -= static_cast<double>(map.A.at(r, c)) * mu1.data[c];
    b.data[r] = static_cast<float>(acc);
  }
  map.bias = std::move(b);
  return map;
}

MinibatchFitResult fit_linear_map_minibatch(const PairSampler& sampler, std::size_t src_dim,
                                            std::size_t dst_dim, const MinibatchOptions& opts) {
  // The map is a single identity-activation dense layer; a disabled bias is
  // pinned at zero by zeroing its gradient.
  RngState init_rng = make_rng(derive_seed(opts.seed, 1));
  DenseNet net = make_dense_net({src_dim, dst_dim}, {Act::identity}, init_rng);
  std::fill(net.layers[0].weight.data.begin(), net.layers[0].weight.data.end(), 0.0f);
  auto params = params_of(net);
  OptState opt = make_adam(params, {opts.lr, 0.9f, 0.999f, 1e-8f});
  NetView<float> view = view_of(net);

  Tensor z1, z2;
  FwdCache<float> cache;
  NetGrads<float> grads;
  const std::size_t window = std::max<std::size_t>(1, std::min<std::size_t>(50, opts.steps));
  std::vector<double> recent;
  for (std::size_t step = 0; step < opts.steps; ++step) {
    sampler(opts.batch, z1, z2);
    if (z1.rows() != z2.rows() || z1.cols() != src_dim || z2.cols() != dst_dim)
      throw std::invalid_argument("fit_linear_map_minibatch: sampler shape mismatch");
    double loss = regression_loss_grads(view, z1.data.data(), z2.data.data(), z1.rows(), cache, &grads);
    if (!std::isfinite(loss)) throw TrainingDivergence("minibatch map fit diverged");
    if (!opts.bias) std::fill(grads.db[0].begin(), grads.db[0].end(), 0.0f);
    adam_step(params, grad_refs(grads), opt);
    recent.push_back(loss);
    if (recent.size() > window) recent.erase(recent.begin());
  }
  MinibatchFitResult result;
  result.map.A = net.layers[0].weight;
  if (opts.bias) result.map.bias = net.layers[0].bias;
  result.map.meta.method = "minibatch";
  result.map.meta.ridge = 0.0;
  double acc = 0.0;
  for (double v : recent) acc += v;
  result.train_l_mse = recent.empty() ? 0.0 : acc / static_cast<double>(recent.size());
  return result;
}

Tensor apply_map(const LinearMap& map, const Tensor& codes) {
  if (codes.rows() != 0 && codes.cols() != map.src_dim())
    throw std::invalid_argument("apply_map: code width " + std::to_string(codes.cols()) +
                                " does not match map source dim " + std::to_string(map.src_dim()));
  const std::size_t m = codes.rows(), src = map.src_dim(), dst = map.dst_dim();
  Tensor out({m, dst});
  parallel_for_rows(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const float* zi = codes.row(i);
      float* oi = out.row(i);
      for (std::size_t r = 0; r < dst; ++r) {
        const float* ar = map.A.row(r);
        float acc = map.bias ? map.bias->data[r] : 0.0f;
        for (std::size_t c = 0; c < src; ++c) acc += ar[c] * zi[c];
        oi[r] = acc;
      }
    }
  });
  return out;
}

LinearMap identity_map(std::size_t dim) {
  LinearMap map;
  map.A = Tensor({dim, dim});
  for (std::size_t i = 0; i < dim; ++i) map.A.at(i, i) = 1.0f;
  map.meta.method = "identity";
  map.meta.ridge = 0.0;
  return map;
}

double map_l_mse(const LinearMap& map, const Tensor& z1, const Tensor& z2) {
  if (z1.rows() != z2.rows()) throw std::invalid_argument("map_l_mse: row mismatch");
  Tensor mapped = apply_map(map, z1);
  return mse(mapped, z2);  // per-component mean
}

EvalReport evaluate_mapping(const EncoderDecoder& src, const EncoderDecoder& dst,
                            const LinearMap& map, const Tensor& images) {
  if (map.src_dim() != src.latent_dim || map.dst_dim() != dst.latent_dim)
    throw std::invalid_argument("evaluate_mapping: map dims do not match the model pair");
  EvalReport report;
  report.n_eval = images.rows();
  Tensor z1 = src.encode_fn(images);
  Tensor z2 = dst.encode_fn(images);
  Tensor mapped = apply_map(map, z1);
  report.l_mse = mse(mapped, z2);
  report.l_mse_raw = report.l_mse * static_cast<double>(dst.latent_dim);
  Tensor recon_src = src.decode_fn(z1);
  report.r_mse = mse_span(images.data.data(), recon_src.data.data(), images.numel());
  Tensor recon_mapped = dst.decode_fn(mapped);
  report.m_mse = mse_span(images.data.data(), recon_mapped.data.data(), images.numel());
  return report;
}

EvalReport evaluate_mapping(const Model& src, const Model& dst, const LinearMap& map,
                            const Tensor& images) {
  return evaluate_mapping(coder_of(src), coder_of(dst), map, images);
}

int relocation_type(const std::string& from_kind, const std::string& to_kind, bool same_instance) {
  if (same_instance) return 0;
  if (from_kind == to_kind) return 1;
  auto objective = [](const std::string& kind) {
    return (kind == "gan" || kind == "styleproxy") ? "adversarial" : "likelihood";
  };
  return objective(from_kind) == objective(to_kind) ? 2 : 3;
}

MatrixReport run_type_matrix(std::span<const ModelEntry> models, const Tensor& dataset_images,
                             const std::optional<SupportSet>& support, const Tensor& eval_images,
                             const MapFitOptions& opts) {
  if (models.size() < 2) throw std::invalid_argument("run_type_matrix: need at least 2 models");
  MatrixReport report;
  report.fit_data = support ? "support" : "full-data";

  // Fit images: the support subset or the whole dataset.
  Tensor fit_images;
  if (support) {
    auto idx = support->indices();
    fit_images = Tensor({idx.size(), kImageSide, kImageSide});
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy_n(dataset_images.row(idx[i]), dataset_images.cols(), fit_images.row(i));
  } else {
    fit_images = dataset_images;
  }

  // Encode once per model.
  std::vector<Tensor> fit_codes(models.size()), eval_codes(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    fit_codes[i] = encode(*models[i].model, fit_images);
    eval_codes[i] = encode(*models[i].model, eval_images);
  }

  for (std::size_t a = 0; a < models.size(); ++a) {
    for (std::size_t b = 0; b < models.size(); ++b) {
      PairReport pair;
      pair.from_id = models[a].id;
      pair.to_id = models[b].id;
      pair.from_kind = models[a].kind;
      pair.to_kind = models[b].kind;
      pair.type = relocation_type(models[a].kind, models[b].kind, a == b);
      LinearMap map;
      if (a == b) {
        map = identity_map(model_latent_dim(*models[a].model));
      } else {
        map = fit_linear_map(fit_codes[a], fit_codes[b], opts);
        map.meta.fit_data = report.fit_data;
      }
      map.src_model_id = models[a].id;
      map.dst_model_id = models[b].id;
      pair.support_l_mse = map_l_mse(map, fit_codes[a], fit_codes[b]);
      pair.eval = evaluate_mapping(*models[a].model, *models[b].model, map, eval_images);
      pair.map = std::move(map);
      report.pairs.push_back(std::move(pair));
    }
  }

  // Aggregate per (from_kind, to_kind, type) in first-appearance order; the
  // self-identity diagonal stays separate from cross-seed pairs.
  std::vector<std::tuple<std::string, std::string, int>> seen;
  for (const auto& pair : report.pairs) {
    auto key = std::make_tuple(pair.from_kind, pair.to_kind, pair.type);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    std::vector<double> ls, rs, ms;
    int type = pair.type;
    for (const auto& p : report.pairs) {
      if (p.from_kind != std::get<0>(key) || p.to_kind != std::get<1>(key) || p.type != std::get<2>(key))
        continue;
      ls.push_back(p.eval.l_mse);
      rs.push_back(p.eval.r_mse);
      ms.push_back(p.eval.m_mse);
    }
    auto mean_std = [](const std::vector<double>& v) {
      double mean = 0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0;
      for (double x : v) var += (x - mean) * (x - mean);
      var /= static_cast<double>(v.size());
      return std::make_pair(mean, std::sqrt(var));
    };
    MatrixRow row;
    row.from_kind = std::get<0>(key);
    row.to_kind = std::get<1>(key);
    row.type = type;
    std::tie(row.l_mean, row.l_std) = mean_std(ls);
    std::tie(row.r_mean, row.r_std) = mean_std(rs);
    std::tie(row.m_mean, row.m_std) = mean_std(ms);
    row.pairs = ls.size();
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace latent
