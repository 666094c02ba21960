#include "latent/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "latent/errors.hpp"

namespace latent {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'L', 'S', 'A', 'T'};
constexpr std::uint8_t kTensorVersion = 1;
constexpr std::uint8_t kDtypeF32 = 1;
constexpr int kModelFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                   static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4))
    throw IoError(IoCode::truncated, std::string("while reading ") + what);
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoCode::truncated, "cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoCode::truncated, "cannot open for reading: " + path);
  return in;
}

void expect_eof(std::istream& in, const std::string& path) {
  if (in.peek() != std::char_traits<char>::eof())
    throw IoError(IoCode::trailing_data, "unexpected bytes after payload in " + path);
}

json net_spec(const DenseNet& net) {
  json layers = json::array();
  for (const auto& l : net.layers) {
    json spec = {{"in", l.in_dim()}, {"out", l.out_dim()}, {"act", act_name(l.act)}};
    if (l.act == Act::leaky_relu) spec["leak"] = l.leak;
    layers.push_back(spec);
  }
  return layers;
}

DenseNet net_from_spec(const json& layers) {
  DenseNet net;
  for (const auto& spec : layers) {
    DenseLayer layer;
    std::size_t in = spec.at("in").get<std::size_t>();
    std::size_t out = spec.at("out").get<std::size_t>();
    layer.weight = Tensor({out, in});
    layer.bias = Tensor({out});
    layer.act = act_from_name(spec.at("act").get<std::string>());
    if (spec.contains("leak")) layer.leak = spec.at("leak").get<float>();
    net.layers.push_back(std::move(layer));
  }
  if (net.layers.empty()) throw IoError(IoCode::header_mismatch, "model net with no layers");
  return net;
}

void write_net_blobs(std::ostream& out, const DenseNet& net) {
  for (const auto& l : net.layers) {
    write_tensor(out, l.weight);
    write_tensor(out, l.bias);
  }
}

void read_net_blobs(std::istream& in, DenseNet& net, const std::string& name) {
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    Tensor w = read_tensor(in);
    Tensor b = read_tensor(in);
    auto& layer = net.layers[li];
    if (!w.same_shape(layer.weight) || !b.same_shape(layer.bias))
      throw IoError(IoCode::bad_shape, "blob shape " + shape_str(w.shape) + " does not match header for " +
                                           name + " layer " + std::to_string(li));
    layer.weight = std::move(w);
    layer.bias = std::move(b);
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensors.
// ---------------------------------------------------------------------------

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.ndim() == 0 || t.ndim() > 255) throw IoError(IoCode::bad_shape, "tensor rank must be 1..255");
  out.write(kMagic, 4);
  out.put(static_cast<char>(kTensorVersion));
  out.put(static_cast<char>(kDtypeF32));
  out.put(static_cast<char>(t.ndim()));
  for (std::size_t extent : t.shape) {
    if (extent > 0xffffffffull) throw IoError(IoCode::bad_shape, "extent exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(extent));
  }
  for (float v : t.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw IoError(IoCode::truncated, "short write");
}

Tensor read_tensor(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw IoError(IoCode::truncated, "missing magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw IoError(IoCode::bad_magic, "not a tensor file");
  int version = in.get(), dtype = in.get(), ndim = in.get();
  if (version == EOF || dtype == EOF || ndim == EOF)
    throw IoError(IoCode::truncated, "missing tensor header");
  if (version != kTensorVersion)
    throw IoError(IoCode::bad_version, "tensor version " + std::to_string(version));
  if (dtype != kDtypeF32) throw IoError(IoCode::bad_dtype, "dtype " + std::to_string(dtype));
  if (ndim < 1) throw IoError(IoCode::bad_shape, "rank 0");
  std::vector<std::size_t> shape(static_cast<std::size_t>(ndim));
  for (auto& extent : shape) extent = get_u32(in, "tensor dims");
  Tensor t(shape);
  for (float& v : t.data) v = std::bit_cast<float>(get_u32(in, "tensor payload"));
  return t;
}

void write_tensor(const std::string& path, const Tensor& t) {
  auto out = open_out(path);
  write_tensor(out, t);
}

Tensor read_tensor(const std::string& path) {
  auto in = open_in(path);
  Tensor t = read_tensor(in);
  expect_eof(in, path);
  return t;
}

// ---------------------------------------------------------------------------
// Models.
// ---------------------------------------------------------------------------

namespace {

struct NamedNet {
  std::string name;
  const DenseNet* net;
};

std::vector<NamedNet> model_nets(const Model& m) {
  return std::visit(
      [](const auto& v) -> std::vector<NamedNet> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, VaeModel> || std::is_same_v<T, SvaeModel>) {
          return {{"encoder", &v.encoder}, {"decoder", &v.decoder}};
        } else if constexpr (std::is_same_v<T, GanModel>) {
          std::vector<NamedNet> nets = {{"generator", &v.generator},
                                        {"discriminator", &v.discriminator}};
          if (v.recoder) nets.push_back({"recoder", &*v.recoder});
          return nets;
        } else {
          return {{"mapping_net", &v.mapping_net}, {"synthesis", &v.synthesis},
                  {"w_recoder", &v.w_recoder}};
        }
      },
      m);
}

}  // namespace

void save_model(const std::string& path, const Model& m) {
  json header;
  header["format_version"] = kModelFormatVersion;
  header["kind"] = model_kind(m);
  header["latent_dim"] = model_latent_dim(m);
  header["seed"] = model_seed(m);
  json hp = json::object();
  if (const auto* vae = std::get_if<VaeModel>(&m)) hp["gamma"] = vae->gamma;
  if (const auto* svae = std::get_if<SvaeModel>(&m)) hp["gamma"] = svae->gamma;
  if (const auto* gan = std::get_if<GanModel>(&m))
    hp["loss"] = gan->loss == GanLoss::least_squares ? "least-squares" : "nonsaturating";
  if (const auto* proxy = std::get_if<StyleProxyModel>(&m))
    hp["recoder_trained"] = proxy->recoder_trained;
  header["hyperparameters"] = hp;
  json nets = json::array();
  auto named = model_nets(m);
  for (const auto& nn : named) nets.push_back({{"name", nn.name}, {"layers", net_spec(*nn.net)}});
  header["nets"] = nets;

  const std::string text = header.dump();
  auto out = open_out(path);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& nn : named) write_net_blobs(out, *nn.net);
  if (!out) throw IoError(IoCode::truncated, "short write: " + path);
}

Model load_model(const std::string& path) {
  auto in = open_in(path);
  std::uint32_t header_len = get_u32(in, "model header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), header_len)) throw IoError(IoCode::truncated, "model header: " + path);
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(IoCode::header_mismatch, std::string("model header is not valid JSON: ") + e.what());
  }
  if (header.at("format_version").get<int>() != kModelFormatVersion)
    throw IoError(IoCode::bad_version,
                  "model format version " + header.at("format_version").dump());

  const std::string kind = header.at("kind").get<std::string>();
  const std::size_t latent_dim = header.at("latent_dim").get<std::size_t>();
  const std::uint64_t seed = header.at("seed").get<std::uint64_t>();
  const json& hp = header.at("hyperparameters");

  std::vector<std::pair<std::string, DenseNet>> nets;
  for (const auto& spec : header.at("nets"))
    nets.emplace_back(spec.at("name").get<std::string>(), net_from_spec(spec.at("layers")));
  auto take = [&](const std::string& name) -> DenseNet& {
    for (auto& [n, net] : nets)
      if (n == name) return net;
    throw IoError(IoCode::header_mismatch, "model header missing net: " + name);
  };
  auto has = [&](const std::string& name) {
    for (auto& [n, net] : nets)
      if (n == name) return true;
    return false;
  };
  for (auto& [name, net] : nets) read_net_blobs(in, net, name);
  expect_eof(in, path);

  if (kind == "vae" || kind == "svae") {
    float gamma = hp.at("gamma").get<float>();
    if (kind == "vae") {
      VaeModel m{std::move(take("encoder")), std::move(take("decoder")), latent_dim, gamma, seed};
      if (m.encoder.output_dim() != 2 * latent_dim)
        throw IoError(IoCode::header_mismatch, "encoder output does not match latent_dim");
      return m;
    }
    SvaeModel m{std::move(take("encoder")), std::move(take("decoder")), latent_dim, gamma, seed};
    if (m.encoder.output_dim() != 2 * latent_dim)
      throw IoError(IoCode::header_mismatch, "encoder output does not match latent_dim");
    return m;
  }
  if (kind == "gan") {
    GanModel m;
    m.generator = std::move(take("generator"));
    m.discriminator = std::move(take("discriminator"));
    if (has("recoder")) m.recoder = std::move(take("recoder"));
    m.latent_dim = latent_dim;
    m.loss = hp.at("loss").get<std::string>() == "nonsaturating" ? GanLoss::nonsaturating
                                                                 : GanLoss::least_squares;
    m.seed = seed;
    if (m.generator.input_dim() != latent_dim)
      throw IoError(IoCode::header_mismatch, "generator input does not match latent_dim");
    return m;
  }
  if (kind == "styleproxy") {
    StyleProxyModel m;
    m.mapping_net = std::move(take("mapping_net"));
    m.synthesis = std::move(take("synthesis"));
    m.w_recoder = std::move(take("w_recoder"));
    m.recoder_trained = hp.value("recoder_trained", false);
    m.latent_dim = latent_dim;
    m.seed = seed;
    return m;
  }
  throw IoError(IoCode::header_mismatch, "unknown model kind: " + kind);
}

// ---------------------------------------------------------------------------
// Images.
// ---------------------------------------------------------------------------

void write_image_pgm(const std::string& path, const Tensor& image) {
  if (image.ndim() != 2) throw IoError(IoCode::bad_shape, "PGM expects a 2-d image");
  const std::size_t h = image.shape[0], w = image.shape[1];
  auto out = open_out(path);
  out << "P5\n" << w << " " << h << "\n255\n";
  for (float v : image.data) {
    if (!(v >= 0.0f && v <= 1.0f))
      throw IoError(IoCode::out_of_range, "pixel value " + std::to_string(v) + " outside [0,1]");
    out.put(static_cast<char>(static_cast<int>(std::floor(255.0f * v + 0.5f))));
  }
  if (!out) throw IoError(IoCode::truncated, "short write: " + path);
}

Tensor image_strip(const Tensor& batch) {
  if (batch.ndim() != 3) throw IoError(IoCode::bad_shape, "image_strip expects {k,h,w}");
  const std::size_t k = batch.shape[0], h = batch.shape[1], w = batch.shape[2];
  Tensor strip({h, k * w});
  for (std::size_t img = 0; img < k; ++img)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        strip.at(y, img * w + x) = batch.data[(img * h + y) * w + x];
  return strip;
}

Tensor image_grid(const Tensor& batch, std::size_t columns) {
  if (batch.ndim() != 3) throw IoError(IoCode::bad_shape, "image_grid expects {k,h,w}");
  if (columns == 0) throw std::invalid_argument("image_grid: columns must be >= 1");
  const std::size_t k = batch.shape[0], h = batch.shape[1], w = batch.shape[2];
  const std::size_t rows = (k + columns - 1) / columns;
  Tensor grid({rows * h, columns * w});
  for (std::size_t img = 0; img < k; ++img) {
    const std::size_t gr = img / columns, gc = img % columns;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        grid.at(gr * h + y, gc * w + x) = batch.data[(img * h + y) * w + x];
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Datasets.
// ---------------------------------------------------------------------------

void write_dataset(const std::string& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  write_tensor(dir + "/images.lsat", ds.images);
  write_tensor(dir + "/factors.lsat", ds.factors);
  json manifest;
  manifest["seed"] = ds.seed;
  manifest["n"] = ds.size();
  json ranges = json::object();
  for (std::size_t i = 0; i < kFactorCount; ++i)
    ranges[kFactorNames[i]] = {kFactorRanges[i].lo, kFactorRanges[i].hi};
  manifest["factor_ranges"] = ranges;
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw IoError(IoCode::truncated, "cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

Dataset read_dataset(const std::string& dir) {
  Dataset ds;
  ds.images = read_tensor(dir + "/images.lsat");
  ds.factors = read_tensor(dir + "/factors.lsat");
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw IoError(IoCode::truncated, "missing manifest in " + dir);
  json manifest = json::parse(in);
  ds.seed = manifest.at("seed").get<std::uint64_t>();
  if (manifest.at("n").get<std::size_t>() != ds.size())
    throw IoError(IoCode::header_mismatch, "manifest n does not match images");
  return ds;
}

// ---------------------------------------------------------------------------
// Support sets.
// ---------------------------------------------------------------------------

void write_support_set(const std::string& path, const SupportSet& set) {
  json doc;
  doc["n"] = set.params.n_features;
  doc["th"] = set.params.threshold;
  doc["target_size"] = set.params.target_size;
  doc["norm"] = set.params.norm == SectorNorm::per_coordinate ? "per-coordinate" : "euclidean";
  doc["pick"] = set.params.pick == PickMode::extreme ? "extreme" : "random";
  doc["pick_seed"] = set.params.pick_seed;
  doc["selected_vars"] = set.selected;
  json entries = json::array();
  for (const auto& e : set.entries) {
    json entry;
    entry["dataset_index"] = e.dataset_index;
    if (e.sector_id) entry["sector_id"] = *e.sector_id;
    else entry["sector_id"] = "topup";
    entries.push_back(entry);
  }
  doc["entries"] = entries;
  auto out = open_out(path);
  out << doc.dump(2) << "\n";
}

SupportSet read_support_set(const std::string& path) {
  auto in = open_in(path);
  json doc = json::parse(in, nullptr, true);
  SupportSet set;
  set.params.n_features = doc.at("n").get<std::size_t>();
  set.params.threshold = doc.at("th").get<float>();
  set.params.target_size = doc.at("target_size").get<std::size_t>();
  set.params.norm = doc.value("norm", "per-coordinate") == "euclidean" ? SectorNorm::euclidean
                                                                       : SectorNorm::per_coordinate;
  set.params.pick = doc.value("pick", "extreme") == "random" ? PickMode::random : PickMode::extreme;
  set.params.pick_seed = doc.value("pick_seed", std::uint64_t{0});
  set.selected = doc.at("selected_vars").get<std::vector<std::size_t>>();
  for (const auto& entry : doc.at("entries")) {
    SupportEntry e;
    e.dataset_index = entry.at("dataset_index").get<std::size_t>();
    const auto& sid = entry.at("sector_id");
    if (sid.is_string()) e.sector_id = std::nullopt;
    else e.sector_id = sid.get<std::uint32_t>();
    set.entries.push_back(e);
  }
  return set;
}

// ---------------------------------------------------------------------------
// Linear maps.
// ---------------------------------------------------------------------------

void save_linear_map(const std::string& path, const LinearMap& map) {
  json header;
  header["format_version"] = 1;
  header["src_model_id"] = map.src_model_id;
  header["dst_model_id"] = map.dst_model_id;
  header["src_dim"] = map.src_dim();
  header["dst_dim"] = map.dst_dim();
  header["bias"] = map.bias.has_value();
  header["fit"] = {{"method", map.meta.method},
                   {"ridge", map.meta.ridge},
                   {"data", map.meta.fit_data},
                   {"n_fit", map.meta.n_fit}};
  const std::string text = header.dump();
  auto out = open_out(path);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_tensor(out, map.A);
  if (map.bias) write_tensor(out, *map.bias);
  if (!out) throw IoError(IoCode::truncated, "short write: " + path);
}

LinearMap load_linear_map(const std::string& path) {
  auto in = open_in(path);
  std::uint32_t header_len = get_u32(in, "map header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), header_len)) throw IoError(IoCode::truncated, "map header: " + path);
  json header = json::parse(text);
  LinearMap map;
  map.src_model_id = header.at("src_model_id").get<std::string>();
  map.dst_model_id = header.at("dst_model_id").get<std::string>();
  map.meta.method = header.at("fit").at("method").get<std::string>();
  map.meta.ridge = header.at("fit").at("ridge").get<double>();
  map.meta.fit_data = header.at("fit").at("data").get<std::string>();
  map.meta.n_fit = header.at("fit").at("n_fit").get<std::size_t>();
  map.A = read_tensor(in);
  if (map.A.ndim() != 2 || map.A.shape[0] != header.at("dst_dim").get<std::size_t>() ||
      map.A.shape[1] != header.at("src_dim").get<std::size_t>())
    throw IoError(IoCode::header_mismatch, "map matrix shape does not match header");
  if (header.at("bias").get<bool>()) map.bias = read_tensor(in);
  expect_eof(in, path);
  return map;
}

// ---------------------------------------------------------------------------
// Reports.
// ---------------------------------------------------------------------------

void write_train_log_csv(const std::string& path, const TrainLog& log) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < log.columns.size(); ++i)
    out << (i ? "," : "") << log.columns[i];
  out << "\n";
  for (const auto& row : log.epochs) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
}

void write_gain_csv(const std::string& path, const GainReport& report) {
  auto out = open_out(path);
  out << "variable_index,gain,rank,cumulative_share\n";
  for (std::size_t rank = 0; rank < report.order.size(); ++rank) {
    std::size_t var = report.order[rank];
    out << var << "," << format_double(report.gains[var]) << "," << rank << ","
        << format_double(report.cumulative_share[rank]) << "\n";
  }
}

namespace {

json pair_json(const PairReport& pair) {
  return {{"from", pair.from_id},
          {"to", pair.to_id},
          {"type", pair.type},
          {"l_mse", pair.eval.l_mse},
          {"l_mse_raw", pair.eval.l_mse_raw},
          {"r_mse", pair.eval.r_mse},
          {"m_mse", pair.eval.m_mse},
          {"support_l_mse", pair.support_l_mse},
          {"n_eval", pair.eval.n_eval}};
}

}  // namespace

void write_eval_report_json(const std::string& path, const PairReport& pair) {
  auto out = open_out(path);
  out << pair_json(pair).dump(2) << "\n";
}

void write_matrix_csv(const std::string& path, const MatrixReport& report) {
  auto out = open_out(path);
  out << "From,To,Type,L-MSE,L-MSE-std,R-MSE,R-MSE-std,M-MSE,M-MSE-std,Pairs\n";
  for (const auto& row : report.rows) {
    out << row.from_kind << "," << row.to_kind << "," << row.type << "," << format_double(row.l_mean)
        << "," << format_double(row.l_std) << "," << format_double(row.r_mean) << ","
        << format_double(row.r_std) << "," << format_double(row.m_mean) << ","
        << format_double(row.m_std) << "," << row.pairs << "\n";
  }
}

void write_matrix_json(const std::string& path, const MatrixReport& report) {
  json doc;
  doc["fit_data"] = report.fit_data;
  json pairs = json::array();
  for (const auto& pair : report.pairs) pairs.push_back(pair_json(pair));
  doc["pairs"] = pairs;
  json rows = json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"from_kind", row.from_kind},
                    {"to_kind", row.to_kind},
                    {"type", row.type},
                    {"l_mse", {{"mean", row.l_mean}, {"std", row.l_std}}},
                    {"r_mse", {{"mean", row.r_mean}, {"std", row.r_std}}},
                    {"m_mse", {{"mean", row.m_mean}, {"std", row.m_std}}},
                    {"pairs", row.pairs}});
  }
  doc["rows"] = rows;
  auto out = open_out(path);
  out << doc.dump(2) << "\n";
}

}  // namespace latent
