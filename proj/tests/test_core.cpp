#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "latent/errors.hpp"
#include "latent/gradcheck.hpp"
#include "latent/linalg.hpp"
#include "latent/nets.hpp"
#include "latent/optim.hpp"
#include "latent/rng.hpp"

using namespace latent;

// ---------------------------------------------------------------------------
// RNG
// ---------------------------------------------------------------------------

TEST_CASE("rng: identical seeds give identical streams") {
  RngState a = make_rng(42), b = make_rng(42);
  Tensor ta = rng_normal(a, {4});
  Tensor tb = rng_normal(b, {4});
  CHECK(ta.data == tb.data);

  RngState c = make_rng(42);
  Tensor t1 = rng_normal(c, {4});
  RngState d = make_rng(42);
  Tensor t2 = rng_normal(d, {4});
  CHECK(fnv1a_bits(t1) == fnv1a_bits(t2));
}

TEST_CASE("rng: distinct seeds give distinct streams") {
  RngState a = make_rng(42), b = make_rng(43);
  Tensor ta = rng_normal(a, {4});
  Tensor tb = rng_normal(b, {4});
  CHECK(ta.data != tb.data);
}

TEST_CASE("rng: sample moments of a long stream") {
  // Oracle: direct moment computation on the generated stream.
  RngState rng = make_rng(7);
  Tensor t = rng_normal(rng, {100000});
  double mean = 0;
  for (float v : t.data) mean += v;
  mean /= t.numel();
  double var = 0;
  for (float v : t.data) var += (v - mean) * (v - mean);
  var /= t.numel();
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("rng: uniform range stays in range") {
  RngState rng = make_rng(11);
  for (int i = 0; i < 1000; ++i) {
    float v = rng_uniform_range(rng, 0.2f, 0.8f);
    CHECK(v >= 0.2f);
    CHECK(v < 0.8f + 1e-6f);
  }
}

TEST_CASE("rng: empty shape rejected") {
  RngState rng = make_rng(1);
  CHECK_THROWS_AS(rng_normal(rng, {}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// forward
// ---------------------------------------------------------------------------

namespace {

DenseNet single_layer(std::size_t in, std::size_t out, Act act) {
  DenseNet net;
  DenseLayer layer;
  layer.weight = Tensor({out, in});
  layer.bias = Tensor({out});
  layer.act = act;
  net.layers.push_back(std::move(layer));
  return net;
}

}  // namespace

TEST_CASE("forward: identity layer with W=I, b=0 reproduces the input") {
  DenseNet net = single_layer(3, 3, Act::identity);
  for (std::size_t i = 0; i < 3; ++i) net.layers[0].weight.at(i, i) = 1.0f;
  Tensor x({2, 3});
  x.data = {1.0f, -2.0f, 0.5f, 3.0f, 0.0f, -1.0f};
  auto [y, cache] = forward(net, x);
  CHECK(y.data == x.data);
}

TEST_CASE("forward: relu on an all-negative input is zero") {
  DenseNet net = single_layer(4, 4, Act::relu);
  for (std::size_t i = 0; i < 4; ++i) net.layers[0].weight.at(i, i) = 1.0f;
  Tensor x = Tensor::full({1, 4}, -1.0f);
  auto [y, cache] = forward(net, x);
  for (float v : y.data) CHECK(v == 0.0f);
}

TEST_CASE("forward: two-layer net matches an explicit matrix product") {
  RngState rng = make_rng(0);
  DenseNet net = make_dense_net({3, 4, 2}, {Act::identity, Act::identity}, rng);
  Tensor x({1, 3});
  x.data = {1.0f, 0.0f, 0.0f};  // e1
  auto [y, cache] = forward(net, x);

  // Oracle: explicit double-precision products, independent of net_forward.
  double h[4], o[2];
  for (int j = 0; j < 4; ++j) {
    h[j] = net.layers[0].bias.data[j];
    for (int k = 0; k < 3; ++k) h[j] += double(net.layers[0].weight.at(j, k)) * double(x.data[k]);
  }
  for (int j = 0; j < 2; ++j) {
    o[j] = net.layers[1].bias.data[j];
    for (int k = 0; k < 4; ++k) o[j] += double(net.layers[1].weight.at(j, k)) * h[k];
  }
  for (int j = 0; j < 2; ++j) CHECK(std::abs(y.data[j] - o[j]) < 1e-5);
}

TEST_CASE("forward: dimension mismatch throws") {
  RngState rng = make_rng(0);
  DenseNet net = make_dense_net({3, 2}, {Act::identity}, rng);
  Tensor x({1, 4});
  CHECK_THROWS_AS(forward(net, x), std::invalid_argument);
}

TEST_CASE("forward/backward: repeated calls are bit-identical") {
  RngState rng = make_rng(5);
  DenseNet net = make_dense_net({6, 8, 4}, {Act::tanh, Act::sigmoid}, rng);
  Tensor x = rng_normal(rng, {3, 6});
  auto [y1, c1] = forward(net, x);
  auto [y2, c2] = forward(net, x);
  CHECK(fnv1a_bits(y1) == fnv1a_bits(y2));
  Tensor g = rng_normal(rng, {3, 4});
  auto b1 = backward(net, c1, g);
  auto b2 = backward(net, c2, g);
  CHECK(fnv1a_bits(b1.dinput) == fnv1a_bits(b2.dinput));
  CHECK(fnv1a_bits(b1.dweights[0]) == fnv1a_bits(b2.dweights[0]));
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

TEST_CASE("backward: zero output gradient gives zero everywhere") {
  RngState rng = make_rng(3);
  DenseNet net = make_dense_net({5, 7, 2}, {Act::leaky_relu, Act::identity}, rng);
  Tensor x = rng_normal(rng, {4, 5});
  auto [y, cache] = forward(net, x);
  Tensor zero({4, 2});
  auto grads = backward(net, cache, zero);
  for (const auto& t : grads.dweights)
    for (float v : t.data) CHECK(v == 0.0f);
  for (float v : grads.dinput.data) CHECK(v == 0.0f);
}

TEST_CASE("backward: one identity layer with a squared-error head is analytic") {
  RngState rng = make_rng(9);
  DenseNet net = make_dense_net({3, 3}, {Act::identity}, rng);
  Tensor x = rng_normal(rng, {2, 3});
  Tensor target = rng_normal(rng, {2, 3});
  auto [y, cache] = forward(net, x);
  // loss = sum (y - t)^2, so dL/dy = 2(Wx + b - t).
  Tensor dout({2, 3});
  for (std::size_t i = 0; i < dout.numel(); ++i) dout.data[i] = 2.0f * (y.data[i] - target.data[i]);
  auto grads = backward(net, cache, dout);
  // dL/dx = W^T dout; checked by explicit accumulation.
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      double expect = 0;
      for (std::size_t o = 0; o < 3; ++o)
        expect += double(net.layers[0].weight.at(o, k)) * double(dout.at(i, o));
      CHECK(grads.dinput.at(i, k) == doctest::Approx(expect).epsilon(1e-4));
    }
  }
  // dL/db = column sums of dout.
  for (std::size_t o = 0; o < 3; ++o) {
    double expect = double(dout.at(0, o)) + double(dout.at(1, o));
    CHECK(grads.dbiases[0].data[o] == doctest::Approx(expect).epsilon(1e-4));
  }
}

TEST_CASE("backward: finite differences across every activation") {
  // Property: analytic gradients match central differences in float64.
  const Act acts[] = {Act::identity, Act::relu, Act::leaky_relu, Act::sigmoid, Act::tanh};
  for (Act act : acts) {
    CAPTURE(act_name(act));
    RngState rng = make_rng(17 + static_cast<std::uint64_t>(act));
    DenseNet net = make_dense_net({4, 6, 3}, {act, act}, rng);
    Tensor x = rng_normal(rng, {3, 4});
    Tensor target = rng_normal(rng, {3, 3});
    double err = grad_check(net, squared_error_head(target), x, 1e-4);
    CHECK(err < 1e-3);
  }
}

// ---------------------------------------------------------------------------
// grad_check
// ---------------------------------------------------------------------------

TEST_CASE("grad_check: linear least-squares loss is exact to 1e-6") {
  RngState rng = make_rng(21);
  DenseNet net = make_dense_net({4, 3}, {Act::identity}, rng);
  Tensor x = rng_normal(rng, {5, 4});
  Tensor target = rng_normal(rng, {5, 3});
  double err = grad_check(net, squared_error_head(target), x, 1e-4);
  CHECK(err < 1e-6);
}

TEST_CASE("grad_check: a corrupted gradient is detected") {
  // Negative control: quadratic objective with one wrong gradient entry.
  std::vector<double> theta = {0.3, -0.7, 1.1};
  auto loss = [&] { return theta[0] * theta[0] + theta[1] * theta[1] + theta[2] * theta[2]; };
  auto analytic = [&] {
    std::vector<double> g = {2 * theta[0], 2 * theta[1] + 0.5, 2 * theta[2]};  // injected bug
    return g;
  };
  auto param = [&](std::size_t i) -> double& { return theta[i]; };
  double err = grad_check_functions(loss, analytic, param, theta.size());
  CHECK(err > 1e-1);
}

TEST_CASE("grad_check: non-positive eps rejected") {
  std::vector<double> theta = {1.0};
  auto loss = [&] { return theta[0]; };
  auto analytic = [&] { return std::vector<double>{1.0}; };
  auto param = [&](std::size_t i) -> double& { return theta[i]; };
  GradCheckOptions opts;
  opts.eps = 0.0;
  CHECK_THROWS_AS(grad_check_functions(loss, analytic, param, 1, opts), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// adam
// ---------------------------------------------------------------------------

TEST_CASE("adam: zero gradients leave parameters unchanged and bump the step") {
  std::vector<float> p = {1.5f, -0.25f};
  std::vector<float> g = {0.0f, 0.0f};
  std::vector<ParamRef> params = {{p.data(), p.size()}};
  std::vector<GradRef> grads = {{g.data(), g.size()}};
  OptState opt = make_adam(params, {0.1f});
  adam_step(params, grads, opt);
  CHECK(p[0] == 1.5f);
  CHECK(p[1] == -0.25f);
  CHECK(opt.step == 1);
}

TEST_CASE("adam: first step on a unit gradient moves by about -lr") {
  // Analytic first step: mhat = 1, vhat = 1, delta = lr / (1 + eps).
  std::vector<float> p = {0.0f};
  std::vector<float> g = {1.0f};
  std::vector<ParamRef> params = {{p.data(), 1}};
  std::vector<GradRef> grads = {{g.data(), 1}};
  OptState opt = make_adam(params, {0.1f});
  adam_step(params, grads, opt);
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-5));
}

TEST_CASE("adam: two identical runs are bit-identical") {
  auto run = [] {
    RngState rng = make_rng(33);
    std::vector<float> p(16), g(16);
    rng_normal_fill(rng, p.data(), p.size());
    std::vector<ParamRef> params = {{p.data(), p.size()}};
    OptState opt = make_adam(params, {0.01f});
    for (int step = 0; step < 10; ++step) {
      rng_normal_fill(rng, g.data(), g.size());
      std::vector<GradRef> grads = {{g.data(), g.size()}};
      adam_step(params, grads, opt);
    }
    return p;
  };
  auto p1 = run();
  auto p2 = run();
  CHECK(p1 == p2);
}

TEST_CASE("adam: non-finite gradients abort with diagnostics") {
  std::vector<float> p = {0.0f};
  std::vector<float> g = {std::numeric_limits<float>::quiet_NaN()};
  std::vector<ParamRef> params = {{p.data(), 1}};
  std::vector<GradRef> grads = {{g.data(), 1}};
  OptState opt = make_adam(params, {0.1f});
  CHECK_THROWS_AS(adam_step(params, grads, opt), TrainingDivergence);
}

// ---------------------------------------------------------------------------
// solve_least_squares
// ---------------------------------------------------------------------------

TEST_CASE("lsq: A = B square full rank recovers the identity") {
  RngState rng = make_rng(40);
  Tensor A = rng_normal(rng, {8, 8});
  Tensor X = solve_least_squares(A, A, 0.0);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(std::abs(X.at(i, j) - (i == j ? 1.0f : 0.0f)) < 1e-4);
}

TEST_CASE("lsq: huge ridge shrinks the solution to zero") {
  RngState rng = make_rng(41);
  Tensor A = rng_normal(rng, {20, 4});
  Tensor B = rng_normal(rng, {20, 3});
  Tensor X = solve_least_squares(A, B, 1e9);
  double norm = 0;
  for (float v : X.data) norm += double(v) * v;
  CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("lsq: planted solution recovered under small noise") {
  // Oracle: construct X*, add 1% noise, verify recovery.
  RngState rng = make_rng(42);
  Tensor A = rng_normal(rng, {500, 16});
  Tensor Xstar = rng_normal(rng, {16, 8});
  Tensor B({500, 8});
  for (std::size_t i = 0; i < 500; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      double acc = 0;
      for (std::size_t k = 0; k < 16; ++k) acc += double(A.at(i, k)) * double(Xstar.at(k, j));
      B.at(i, j) = static_cast<float>(acc);
    }
  Tensor noise = rng_normal(rng, {500, 8});
  for (std::size_t i = 0; i < B.numel(); ++i) B.data[i] += 0.01f * noise.data[i];
  Tensor X = solve_least_squares(A, B, 1e-6);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < X.numel(); ++i) {
    double d = double(X.data[i]) - double(Xstar.data[i]);
    num += d * d;
    den += double(Xstar.data[i]) * Xstar.data[i];
  }
  CHECK(std::sqrt(num / den) < 0.05);
}

TEST_CASE("lsq: exact consistent system reproduced to 1e-4") {
  RngState rng = make_rng(43);
  Tensor A = rng_normal(rng, {40, 6});
  Tensor Xstar = rng_normal(rng, {6, 2});
  Tensor B({40, 2});
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0;
      for (std::size_t k = 0; k < 6; ++k) acc += double(A.at(i, k)) * double(Xstar.at(k, j));
      B.at(i, j) = static_cast<float>(acc);
    }
  Tensor X = solve_least_squares(A, B, 0.0);
  for (std::size_t i = 0; i < X.numel(); ++i)
    CHECK(std::abs(X.data[i] - Xstar.data[i]) < 1e-4);
}

TEST_CASE("lsq: singular system without ridge advises ridge") {
  Tensor A({4, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    A.at(i, 0) = static_cast<float>(i + 1);
    A.at(i, 1) = 2.0f * (i + 1);  // duplicate direction
  }
  Tensor B({4, 1});
  B.data = {1, 2, 3, 4};
  CHECK_THROWS_WITH_AS(solve_least_squares(A, B, 0.0),
                       doctest::Contains("ridge"), std::invalid_argument);
  CHECK_NOTHROW(solve_least_squares(A, B, 1e-4));
}

TEST_CASE("lsq: row mismatch and negative ridge rejected") {
  Tensor A({3, 2}), B({4, 1});
  CHECK_THROWS_AS(solve_least_squares(A, B, 0.0), std::invalid_argument);
  Tensor B2({3, 1});
  CHECK_THROWS_AS(solve_least_squares(A, B2, -1.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// seed derivation
// ---------------------------------------------------------------------------

TEST_CASE("derive_seed: children are deterministic and distinct") {
  CHECK(derive_seed(123, 0) == derive_seed(123, 0));
  CHECK(derive_seed(123, 0) != derive_seed(123, 1));
  CHECK(derive_seed(123, 0) != derive_seed(124, 0));
}
