#pragma once

#include <cmath>
#include <vector>

#include "latent/nets.hpp"

namespace latent {

enum class GanLoss { least_squares, nonsaturating };

// ---------------------------------------------------------------------------
// Differentiable training objectives, templated on the scalar type so the
// float32 training path and the float64 gradient checks share one
// implementation. Loss values are always accumulated and returned in float64.
// ---------------------------------------------------------------------------

template <typename T>
struct VaeScratch {
  FwdCache<T> enc, dec;
  std::vector<T> mu, logvar, z, dxhat, denc_out;
  std::vector<T> x1, x2, s;  // svae split buffers
};

struct VaeLossParts {
  double total = 0, recon = 0, kl = 0;
};

// Per-pixel MSE(x, xhat) + gamma * KL(N(mu, sigma^2) || N(0,1)), the KL taken
// per latent dim, both averaged over the batch. `eps` is the fixed
// reparameterization noise (m x d). Gradients are skipped when enc_g is null.
template <typename T>
VaeLossParts vae_loss_grads(const NetView<T>& encoder, const NetView<T>& decoder, const T* x,
                            std::size_t m, std::size_t d, T gamma, const T* eps, VaeScratch<T>& s,
                            NetGrads<T>* enc_g, NetGrads<T>* dec_g) {
  const std::size_t two_d = 2 * d;
  const auto& enc_out = net_forward(encoder, x, m, s.enc);
  s.mu.resize(m * d);
  s.logvar.resize(m * d);
  s.z.resize(m * d);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      s.mu[i * d + j] = enc_out[i * two_d + j];
      s.logvar[i * d + j] = enc_out[i * two_d + d + j];
      s.z[i * d + j] = s.mu[i * d + j] + std::exp(T(0.5) * s.logvar[i * d + j]) * eps[i * d + j];
    }
  }
  const auto& xhat = net_forward(decoder, s.z.data(), m, s.dec);
  const std::size_t npix = decoder.output_dim();

  VaeLossParts parts;
  for (std::size_t i = 0; i < m * npix; ++i) {
    double diff = static_cast<double>(xhat[i]) - static_cast<double>(x[i]);
    parts.recon += diff * diff;
  }
  parts.recon /= static_cast<double>(m * npix);
  for (std::size_t i = 0; i < m * d; ++i) {
    double lv = s.logvar[i], mu = s.mu[i];
    parts.kl += -0.5 * (1.0 + lv - mu * mu - std::exp(lv));
  }
  parts.kl /= static_cast<double>(m * d);
  parts.total = parts.recon + static_cast<double>(gamma) * parts.kl;
  if (!enc_g || !dec_g) return parts;

  s.dxhat.resize(m * npix);
  const T recon_scale = T(2) / static_cast<T>(m * npix);
  for (std::size_t i = 0; i < m * npix; ++i) s.dxhat[i] = recon_scale * (xhat[i] - x[i]);
  net_backward(decoder, s.dec, s.dxhat.data(), true, *dec_g);
  const std::vector<T>& dz = dec_g->dx;

  s.denc_out.resize(m * two_d);
  const T kl_scale = gamma / static_cast<T>(m * d);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      T dzv = dz[i * d + j];
      T mu = s.mu[i * d + j];
      T lv = s.logvar[i * d + j];
      s.denc_out[i * two_d + j] = dzv + kl_scale * mu;
      s.denc_out[i * two_d + d + j] =
          dzv * eps[i * d + j] * T(0.5) * std::exp(T(0.5) * lv) + kl_scale * T(0.5) * (std::exp(lv) - T(1));
    }
  }
  net_backward(encoder, s.enc, s.denc_out.data(), false, *enc_g);
  return parts;
}

// Split-decoder variant: the decoder emits 3*npix logits (x1, x2, sigma);
// xhat = sigma.x1 + (1-sigma).x2 with all three passed through a logistic.
template <typename T>
VaeLossParts svae_loss_grads(const NetView<T>& encoder, const NetView<T>& decoder, const T* x,
                             std::size_t m, std::size_t d, T gamma, const T* eps, VaeScratch<T>& s,
                             NetGrads<T>* enc_g, NetGrads<T>* dec_g) {
  const std::size_t two_d = 2 * d;
  const auto& enc_out = net_forward(encoder, x, m, s.enc);
  s.mu.resize(m * d);
  s.logvar.resize(m * d);
  s.z.resize(m * d);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      s.mu[i * d + j] = enc_out[i * two_d + j];
      s.logvar[i * d + j] = enc_out[i * two_d + d + j];
      s.z[i * d + j] = s.mu[i * d + j] + std::exp(T(0.5) * s.logvar[i * d + j]) * eps[i * d + j];
    }
  }
  const auto& logits = net_forward(decoder, s.z.data(), m, s.dec);
  const std::size_t npix = decoder.output_dim() / 3;
  auto logistic = [](T v) { return T(1) / (T(1) + std::exp(-v)); };
  s.x1.resize(m * npix);
  s.x2.resize(m * npix);
  s.s.resize(m * npix);

  VaeLossParts parts;
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = logits.data() + i * 3 * npix;
    for (std::size_t p = 0; p < npix; ++p) {
      T x1 = logistic(row[p]);
      T x2 = logistic(row[npix + p]);
      T sg = logistic(row[2 * npix + p]);
      s.x1[i * npix + p] = x1;
      s.x2[i * npix + p] = x2;
      s.s[i * npix + p] = sg;
      double xhat = static_cast<double>(sg) * static_cast<double>(x1) +
                    (1.0 - static_cast<double>(sg)) * static_cast<double>(x2);
      double diff = xhat - static_cast<double>(x[i * npix + p]);
      parts.recon += diff * diff;
    }
  }
  parts.recon /= static_cast<double>(m * npix);
  for (std::size_t i = 0; i < m * d; ++i) {
    double lv = s.logvar[i], mu = s.mu[i];
    parts.kl += -0.5 * (1.0 + lv - mu * mu - std::exp(lv));
  }
  parts.kl /= static_cast<double>(m * d);
  parts.total = parts.recon + static_cast<double>(gamma) * parts.kl;
  if (!enc_g || !dec_g) return parts;

  s.dxhat.resize(m * 3 * npix);
  const T recon_scale = T(2) / static_cast<T>(m * npix);
  for (std::size_t i = 0; i < m; ++i) {
    T* drow = s.dxhat.data() + i * 3 * npix;
    for (std::size_t p = 0; p < npix; ++p) {
      T x1 = s.x1[i * npix + p], x2 = s.x2[i * npix + p], sg = s.s[i * npix + p];
      T xhat = sg * x1 + (T(1) - sg) * x2;
      T dxh = recon_scale * (xhat - x[i * npix + p]);
      drow[p] = dxh * sg * x1 * (T(1) - x1);
      drow[npix + p] = dxh * (T(1) - sg) * x2 * (T(1) - x2);
      drow[2 * npix + p] = dxh * (x1 - x2) * sg * (T(1) - sg);
    }
  }
  net_backward(decoder, s.dec, s.dxhat.data(), true, *dec_g);
  const std::vector<T>& dz = dec_g->dx;

  s.denc_out.resize(m * two_d);
  const T kl_scale = gamma / static_cast<T>(m * d);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      T dzv = dz[i * d + j];
      T mu = s.mu[i * d + j];
      T lv = s.logvar[i * d + j];
      s.denc_out[i * two_d + j] = dzv + kl_scale * mu;
      s.denc_out[i * two_d + d + j] =
          dzv * eps[i * d + j] * T(0.5) * std::exp(T(0.5) * lv) + kl_scale * T(0.5) * (std::exp(lv) - T(1));
    }
  }
  net_backward(encoder, s.enc, s.denc_out.data(), false, *enc_g);
  return parts;
}

// Mean over all output elements of squared error; the recoder objective and
// the minibatch map fit.
template <typename T>
double regression_loss_grads(const NetView<T>& net, const T* input, const T* target, std::size_t m,
                             FwdCache<T>& cache, NetGrads<T>* g) {
  const auto& out = net_forward(net, input, m, cache);
  const std::size_t n = m * net.output_dim();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double diff = static_cast<double>(out[i]) - static_cast<double>(target[i]);
    loss += diff * diff;
  }
  loss /= static_cast<double>(n);
  if (g) {
    std::vector<T> dout(n);
    const T scale = T(2) / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) dout[i] = scale * (out[i] - target[i]);
    net_backward(net, cache, dout.data(), false, *g);
  }
  return loss;
}

namespace detail {
template <typename T>
T softplus(T v) {
  return v > T(30) ? v : std::log1p(std::exp(v));
}
}  // namespace detail

// Discriminator objective on a real and a fake batch of equal size.
template <typename T>
double gan_disc_loss_grads(const NetView<T>& disc, const T* x_real, const T* x_fake, std::size_t m,
                           GanLoss kind, FwdCache<T>& c_real, FwdCache<T>& c_fake, NetGrads<T>* g) {
  const auto& d_real = net_forward(disc, x_real, m, c_real);
  double loss = 0.0;
  std::vector<T> dout(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (kind == GanLoss::least_squares) {
      double diff = static_cast<double>(d_real[i]) - 1.0;
      loss += 0.5 * diff * diff;
      dout[i] = static_cast<T>(diff) / static_cast<T>(m);
    } else {
      loss += detail::softplus(-static_cast<double>(d_real[i]));
      dout[i] = -(T(1) / (T(1) + std::exp(d_real[i]))) / static_cast<T>(m);
    }
  }
  if (g) net_backward(disc, c_real, dout.data(), false, *g, /*accumulate=*/false);

  const auto& d_fake = net_forward(disc, x_fake, m, c_fake);
  for (std::size_t i = 0; i < m; ++i) {
    if (kind == GanLoss::least_squares) {
      double v = d_fake[i];
      loss += 0.5 * v * v;
      dout[i] = static_cast<T>(v) / static_cast<T>(m);
    } else {
      loss += detail::softplus(static_cast<double>(d_fake[i]));
      dout[i] = (T(1) / (T(1) + std::exp(-d_fake[i]))) / static_cast<T>(m);
    }
  }
  if (g) net_backward(disc, c_fake, dout.data(), false, *g, /*accumulate=*/true);
  return loss / static_cast<double>(m);
}

// Generator objective through a frozen discriminator. The generator is a
// stack of nets applied in sequence (one net for a plain GAN, mapping +
// synthesis for the style proxy). Gradients land in stack_grads.
template <typename T>
double gan_gen_loss_grads(const std::vector<NetView<T>>& gen_stack, const NetView<T>& disc,
                          const T* z, std::size_t m, GanLoss kind,
                          std::vector<FwdCache<T>>& stack_caches, FwdCache<T>& disc_cache,
                          std::vector<NetGrads<T>>* stack_grads) {
  stack_caches.resize(gen_stack.size());
  const T* current = z;
  for (std::size_t s = 0; s < gen_stack.size(); ++s)
    current = net_forward(gen_stack[s], current, m, stack_caches[s]).data();
  const auto& d_fake = net_forward(disc, current, m, disc_cache);

  double loss = 0.0;
  std::vector<T> dout(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (kind == GanLoss::least_squares) {
      double diff = static_cast<double>(d_fake[i]) - 1.0;
      loss += 0.5 * diff * diff;
      dout[i] = static_cast<T>(diff) / static_cast<T>(m);
    } else {
      loss += detail::softplus(-static_cast<double>(d_fake[i]));
      dout[i] = -(T(1) / (T(1) + std::exp(d_fake[i]))) / static_cast<T>(m);
    }
  }
  loss /= static_cast<double>(m);
  if (!stack_grads) return loss;

  NetGrads<T> disc_grads;  // discarded; only the input gradient is needed
  net_backward(disc, disc_cache, dout.data(), true, disc_grads);
  stack_grads->resize(gen_stack.size());
  const std::vector<T>* upstream = &disc_grads.dx;
  for (std::size_t s = gen_stack.size(); s-- > 0;) {
    net_backward(gen_stack[s], stack_caches[s], upstream->data(), s > 0, (*stack_grads)[s]);
    if (s > 0) upstream = &(*stack_grads)[s].dx;
  }
  return loss;
}

}  // namespace latent
