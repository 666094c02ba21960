#include "latent/nets.hpp"

#include <cmath>

namespace latent {

const char* act_name(Act a) {
  switch (a) {
    case Act::identity: return "identity";
    case Act::relu: return "relu";
    case Act::leaky_relu: return "leaky_relu";
    case Act::sigmoid: return "sigmoid";
    case Act::tanh: return "tanh";
  }
  return "identity";
}

Act act_from_name(const std::string& name) {
  if (name == "identity") return Act::identity;
  if (name == "relu") return Act::relu;
  if (name == "leaky_relu") return Act::leaky_relu;
  if (name == "sigmoid") return Act::sigmoid;
  if (name == "tanh") return Act::tanh;
  throw std::invalid_argument("unknown activation: " + name);
}

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.numel() + l.bias.numel();
  return n;
}

DenseNet make_dense_net(const std::vector<std::size_t>& widths, const std::vector<Act>& acts,
                        RngState& rng, float leak) {
  if (widths.size() < 2) throw std::invalid_argument("make_dense_net: need at least one layer");
  if (acts.size() != widths.size() - 1)
    throw std::invalid_argument("make_dense_net: one activation per layer required");
  DenseNet net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    std::size_t in = widths[l], out = widths[l + 1];
    layer.weight = rng_normal(rng, {out, in});
    bool rectified = acts[l] == Act::relu || acts[l] == Act::leaky_relu;
    float scale = std::sqrt((rectified ? 2.0f : 1.0f) / static_cast<float>(in));
    for (float& w : layer.weight.data) w *= scale;
    layer.bias = Tensor::zeros({out});
    layer.act = acts[l];
    layer.leak = leak;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

NetView<float> view_of(const DenseNet& net) {
  NetView<float> v;
  v.layers.reserve(net.layers.size());
  for (const auto& l : net.layers)
    v.layers.push_back({l.weight.data.data(), l.bias.data.data(), l.in_dim(), l.out_dim(), l.act, l.leak});
  return v;
}

ShadowNet widen(const DenseNet& net) {
  ShadowNet s;
  s.layers.resize(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    auto& sl = s.layers[i];
    sl.w.assign(l.weight.data.begin(), l.weight.data.end());
    sl.b.assign(l.bias.data.begin(), l.bias.data.end());
    sl.in = l.in_dim();
    sl.out = l.out_dim();
    sl.act = l.act;
    sl.leak = l.leak;
  }
  return s;
}

NetView<double> view_of(const ShadowNet& net) {
  NetView<double> v;
  v.layers.reserve(net.layers.size());
  for (const auto& l : net.layers)
    v.layers.push_back({l.w.data(), l.b.data(), l.in, l.out, l.act, l.leak});
  return v;
}

std::pair<Tensor, FwdCache<float>> forward(const DenseNet& net, const Tensor& batch) {
  std::size_t in = net.input_dim();
  if (batch.cols() != in)
    throw std::invalid_argument("forward: batch width " + std::to_string(batch.cols()) +
                                " does not match input dim " + std::to_string(in));
  FwdCache<float> cache;
  const auto& out = net_forward(view_of(net), batch.data.data(), batch.rows(), cache);
  Tensor result({batch.rows(), net.output_dim()});
  result.data = out;
  return {std::move(result), std::move(cache)};
}

BackwardResult backward(const DenseNet& net, const FwdCache<float>& cache, const Tensor& grad_output) {
  if (grad_output.numel() != cache.batch * net.output_dim())
    throw std::invalid_argument("backward: grad_output shape mismatch");
  NetGrads<float> grads;
  net_backward(view_of(net), cache, grad_output.data.data(), true, grads);
  BackwardResult r;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Tensor dw({net.layers[l].out_dim(), net.layers[l].in_dim()});
    dw.data = grads.dw[l];
    Tensor db({net.layers[l].out_dim()});
    db.data = grads.db[l];
    r.dweights.push_back(std::move(dw));
    r.dbiases.push_back(std::move(db));
  }
  r.dinput = Tensor({cache.batch, net.input_dim()});
  r.dinput.data = grads.dx;
  return r;
}

std::vector<ParamRef> params_of(DenseNet& net) {
  std::vector<ParamRef> refs;
  for (auto& l : net.layers) {
    refs.push_back({l.weight.data.data(), l.weight.numel()});
    refs.push_back({l.bias.data.data(), l.bias.numel()});
  }
  return refs;
}

std::vector<ParamRef64> params_of(ShadowNet& net) {
  std::vector<ParamRef64> refs;
  for (auto& l : net.layers) {
    refs.push_back({l.w.data(), l.w.size()});
    refs.push_back({l.b.data(), l.b.size()});
  }
  return refs;
}

}  // namespace latent
