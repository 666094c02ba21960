#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "latent/rng.hpp"
#include "latent/tensor.hpp"

namespace latent {

enum class Act : std::uint8_t { identity = 0, relu = 1, leaky_relu = 2, sigmoid = 3, tanh = 4 };

const char* act_name(Act a);
Act act_from_name(const std::string& name);

struct DenseLayer {
  Tensor weight;      // out x in
  Tensor bias;        // out
  Act act = Act::identity;
  float leak = 0.2f;  // leaky_relu slope
  std::size_t in_dim() const { return weight.shape[1]; }
  std::size_t out_dim() const { return weight.shape[0]; }
};

// Feed-forward stack of dense layers. Adjacent dimensions must chain.
struct DenseNet {
  std::vector<DenseLayer> layers;
  std::size_t input_dim() const { return layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.back().out_dim(); }
  std::size_t param_count() const;
};

// widths = {in, hidden..., out}; acts has one entry per layer.
DenseNet make_dense_net(const std::vector<std::size_t>& widths, const std::vector<Act>& acts,
                        RngState& rng, float leak = 0.2f);

// ---------------------------------------------------------------------------
// Computation kernels, templated so training runs in float32 while gradient
// checks run against a float64 shadow copy of the same network.
// ---------------------------------------------------------------------------

template <typename T>
struct LayerView {
  const T* w = nullptr;
  const T* b = nullptr;
  std::size_t in = 0, out = 0;
  Act act = Act::identity;
  T leak = T(0);
};

template <typename T>
struct NetView {
  std::vector<LayerView<T>> layers;
  std::size_t input_dim() const { return layers.front().in; }
  std::size_t output_dim() const { return layers.back().out; }
};

NetView<float> view_of(const DenseNet& net);

// Materialized float64 copy used by grad checks and inversion.
struct ShadowLayer {
  std::vector<double> w, b;
  std::size_t in = 0, out = 0;
  Act act = Act::identity;
  double leak = 0.0;
};
struct ShadowNet {
  std::vector<ShadowLayer> layers;
  std::size_t input_dim() const { return layers.front().in; }
  std::size_t output_dim() const { return layers.back().out; }
};
ShadowNet widen(const DenseNet& net);
NetView<double> view_of(const ShadowNet& net);

template <typename T>
struct FwdCache {
  std::size_t batch = 0;
  std::vector<std::vector<T>> x;  // x[0] = input, x[l+1] = output of layer l
  std::vector<std::vector<T>> z;  // z[l]  = pre-activation of layer l
};

template <typename T>
struct NetGrads {
  std::vector<std::vector<T>> dw, db;
  std::vector<T> dx;
};

namespace detail {

template <typename T>
T activate(Act act, T z, T leak) {
  switch (act) {
    case Act::identity: return z;
    case Act::relu: return z > T(0) ? z : T(0);
    case Act::leaky_relu: return z > T(0) ? z : leak * z;
    case Act::sigmoid: return T(1) / (T(1) + std::exp(-z));
    case Act::tanh: return std::tanh(z);
  }
  return z;
}

// Derivative in terms of pre-activation z and output y.
template <typename T>
T activate_grad(Act act, T z, T y, T leak) {
  switch (act) {
    case Act::identity: return T(1);
    case Act::relu: return z > T(0) ? T(1) : T(0);
    case Act::leaky_relu: return z > T(0) ? T(1) : leak;
    case Act::sigmoid: return y * (T(1) - y);
    case Act::tanh: return T(1) - y * y;
  }
  return T(1);
}

// z[i,o] = b[o] + sum_k x[i,k] * w[o,k]
template <typename T>
void affine_fwd(const T* x, std::size_t m, std::size_t in, const T* w, const T* b,
                std::size_t out, T* z) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* xi = x + i * in;
    T* zi = z + i * out;
    for (std::size_t o = 0; o < out; ++o) {
      const T* wo = w + o * in;
      T acc0 = T(0), acc1 = T(0), acc2 = T(0), acc3 = T(0);
      std::size_t k = 0;
      for (; k + 4 <= in; k += 4) {
        acc0 += xi[k] * wo[k];
        acc1 += xi[k + 1] * wo[k + 1];
        acc2 += xi[k + 2] * wo[k + 2];
        acc3 += xi[k + 3] * wo[k + 3];
      }
      T acc = ((acc0 + acc1) + (acc2 + acc3));
      for (; k < in; ++k) acc += xi[k] * wo[k];
      zi[o] = acc + b[o];
    }
  }
}

}  // namespace detail

template <typename T>
const std::vector<T>& net_forward(const NetView<T>& net, const T* input, std::size_t batch,
                                  FwdCache<T>& c) {
  const std::size_t n_layers = net.layers.size();
  c.batch = batch;
  c.x.resize(n_layers + 1);
  c.z.resize(n_layers);
  c.x[0].assign(input, input + batch * net.layers[0].in);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = net.layers[l];
    c.z[l].resize(batch * layer.out);
    detail::affine_fwd(c.x[l].data(), batch, layer.in, layer.w, layer.b, layer.out, c.z[l].data());
    c.x[l + 1].resize(batch * layer.out);
    const T* z = c.z[l].data();
    T* y = c.x[l + 1].data();
    for (std::size_t i = 0, n = batch * layer.out; i < n; ++i)
      y[i] = detail::activate(layer.act, z[i], layer.leak);
  }
  return c.x[n_layers];
}

// Reverse-mode gradients of the cached computation. When `accumulate` is set
// the parameter gradients are added to whatever `g` already holds.
template <typename T>
void net_backward(const NetView<T>& net, const FwdCache<T>& c, const T* grad_output,
                  bool want_input_grad, NetGrads<T>& g, bool accumulate = false) {
  const std::size_t n_layers = net.layers.size();
  const std::size_t m = c.batch;
  g.dw.resize(n_layers);
  g.db.resize(n_layers);
  std::vector<T> upstream(grad_output, grad_output + m * net.layers.back().out);
  std::vector<T> downstream;
  for (std::size_t li = n_layers; li-- > 0;) {
    const auto& layer = net.layers[li];
    if (!accumulate || g.dw[li].size() != layer.out * layer.in) {
      if (g.dw[li].size() != layer.out * layer.in) g.dw[li].assign(layer.out * layer.in, T(0));
      else if (!accumulate) std::fill(g.dw[li].begin(), g.dw[li].end(), T(0));
      if (g.db[li].size() != layer.out) g.db[li].assign(layer.out, T(0));
      else if (!accumulate) std::fill(g.db[li].begin(), g.db[li].end(), T(0));
    }
    // dz = upstream * act'(z)
    const T* z = c.z[li].data();
    const T* y = c.x[li + 1].data();
    T* dz = upstream.data();
    for (std::size_t i = 0, n = m * layer.out; i < n; ++i)
      dz[i] *= detail::activate_grad(layer.act, z[i], y[i], layer.leak);
    // dw[o,k] += sum_i dz[i,o] * x[i,k];   db[o] += sum_i dz[i,o]
    const T* x = c.x[li].data();
    T* dw = g.dw[li].data();
    T* db = g.db[li].data();
    for (std::size_t i = 0; i < m; ++i) {
      const T* xi = x + i * layer.in;
      const T* dzi = dz + i * layer.out;
      for (std::size_t o = 0; o < layer.out; ++o) {
        T a = dzi[o];
        if (a == T(0)) continue;
        db[o] += a;
        T* dwo = dw + o * layer.in;
        for (std::size_t k = 0; k < layer.in; ++k) dwo[k] += a * xi[k];
      }
    }
    // downstream[i,k] = sum_o dz[i,o] * w[o,k]
    if (li > 0 || want_input_grad) {
      downstream.assign(m * layer.in, T(0));
      for (std::size_t i = 0; i < m; ++i) {
        const T* dzi = dz + i * layer.out;
        T* di = downstream.data() + i * layer.in;
        for (std::size_t o = 0; o < layer.out; ++o) {
          T a = dzi[o];
          if (a == T(0)) continue;
          const T* wo = layer.w + o * layer.in;
          for (std::size_t k = 0; k < layer.in; ++k) di[k] += a * wo[k];
        }
      }
      upstream.swap(downstream);
    }
  }
  if (want_input_grad) g.dx = std::move(upstream);
}

// ---------------------------------------------------------------------------
// Tensor-level wrappers.
// ---------------------------------------------------------------------------

std::pair<Tensor, FwdCache<float>> forward(const DenseNet& net, const Tensor& batch);

struct BackwardResult {
  std::vector<Tensor> dweights, dbiases;
  Tensor dinput;
};
BackwardResult backward(const DenseNet& net, const FwdCache<float>& cache, const Tensor& grad_output);

// Flat parameter access used by the optimizer and serialization.
struct ParamRef {
  float* p = nullptr;
  std::size_t n = 0;
};
std::vector<ParamRef> params_of(DenseNet& net);

struct ParamRef64 {
  double* p = nullptr;
  std::size_t n = 0;
};
std::vector<ParamRef64> params_of(ShadowNet& net);

}  // namespace latent
